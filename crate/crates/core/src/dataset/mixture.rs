use serde::{Deserialize, Serialize};
use std::fmt;

use super::record::{DomainTag, GenerationRoute, PreferenceRecord, Source};
use crate::numeric::percent_tenths;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub label: String,
    pub count: u64,
    /// Rounded half-to-even to one decimal place.
    pub percent: f64,
    pub exact_percent: f64,
}

/// One breakdown of the corpus. `total` is the denominator for the group:
/// all records for sources, tagged records for domains, routed records for
/// generation routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareGroup {
    pub total: u64,
    pub shares: Vec<Share>,
}

impl ShareGroup {
    fn from_counts<'a>(counts: impl IntoIterator<Item = (&'a str, u64)>) -> Self {
        let counts: Vec<(&str, u64)> = counts.into_iter().collect();
        let total = counts.iter().map(|(_, c)| c).sum();
        let shares = counts
            .into_iter()
            .map(|(label, count)| share(label, count, total))
            .collect();
        ShareGroup { total, shares }
    }

    pub fn get(&self, label: &str) -> Option<&Share> {
        self.shares.iter().find(|s| s.label == label)
    }
}

fn share(label: &str, count: u64, total: u64) -> Share {
    let (percent, exact_percent) = if total == 0 {
        (0.0, 0.0)
    } else {
        (
            percent_tenths(count, total) as f64 / 10.0,
            100.0 * count as f64 / total as f64,
        )
    };
    Share { label: label.to_string(), count, percent, exact_percent }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureReport {
    pub records: u64,
    pub sources: ShareGroup,
    pub domains: ShareGroup,
    pub with_images: Share,
    pub routes: ShareGroup,
}

pub fn mixture_report(records: &[PreferenceRecord]) -> MixtureReport {
    let n = records.len() as u64;
    let count_by = |pred: &dyn Fn(&PreferenceRecord) -> bool| {
        records.iter().filter(|r| pred(r)).count() as u64
    };
    let sources = ShareGroup::from_counts(
        Source::ALL
            .iter()
            .map(|&s| (s.as_str(), count_by(&|r| r.source == s))),
    );
    let domains = ShareGroup::from_counts(
        DomainTag::ALL
            .iter()
            .map(|&d| (d.as_str(), count_by(&|r| r.domain_tag == Some(d)))),
    );
    let routes = ShareGroup::from_counts(
        GenerationRoute::ALL
            .iter()
            .map(|&g| (g.as_str(), count_by(&|r| r.route == Some(g)))),
    );
    let with_images = share("with_images", count_by(&|r| r.has_image()), n);
    MixtureReport { records: n, sources, domains, with_images, routes }
}

impl fmt::Display for MixtureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records: {}", self.records)?;
        for (title, group) in [("source", &self.sources), ("domain", &self.domains), ("route", &self.routes)] {
            writeln!(f, "{title} (n={}):", group.total)?;
            for s in &group.shares {
                writeln!(f, "  {:<14} {:>8} {:>6.1}%", s.label, s.count, s.percent)?;
            }
        }
        writeln!(
            f,
            "with images: {} ({:.1}%)",
            self.with_images.count, self.with_images.percent
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::record::sample_record;

    #[test]
    fn empty_report_is_defined() {
        let r = mixture_report(&[]);
        assert_eq!(r.records, 0);
        assert!(r.sources.shares.iter().all(|s| s.percent == 0.0));
        assert_eq!(r.with_images.percent, 0.0);
    }

    #[test]
    fn single_source_is_hundred_percent() {
        let recs: Vec<_> = (0..7).map(|i| sample_record(&i.to_string())).collect();
        let r = mixture_report(&recs);
        assert_eq!(r.sources.get("llava_critic").unwrap().percent, 100.0);
        assert_eq!(r.sources.get("inhouse").unwrap().percent, 0.0);
        assert_eq!(r.with_images.percent, 100.0);
    }
}
