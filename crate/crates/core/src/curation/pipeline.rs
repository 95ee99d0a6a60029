use std::fs;
use std::path::Path;

use super::audit::CurationAudit;
use super::stages::{stage1, stage2_refine};
use super::{CurationConfig, CurationError};
use crate::clients::GenerationClient;
use crate::dataset::{load_records, write_records};
use crate::scoring::Scorer;

/// The surrogate scorer and the client that rewrites weak chosen responses.
pub struct RefineClients<'a> {
    pub scorer: &'a dyn Scorer,
    pub regenerator: &'a dyn GenerationClient,
}

fn write_audit(audit: &CurationAudit, path: &Path) -> Result<(), CurationError> {
    let mut json = serde_json::to_vec_pretty(audit).expect("audit serializes");
    json.push(b'\n');
    fs::write(path, json).map_err(|e| CurationError::Io { path: path.to_path_buf(), source: e })
}

/// Loads `input`, runs the stage-1 filters and stage-2 refinement, and writes
/// the surviving records to `output` and the audit to `audit_path`. Without
/// `refine` clients only stage 1 runs. On failure the audit accumulated so
/// far is still written.
pub fn run_pipeline(
    input: &Path,
    output: &Path,
    audit_path: &Path,
    config: &CurationConfig,
    refine: Option<&RefineClients<'_>>,
) -> Result<CurationAudit, CurationError> {
    let result = (|| -> Result<CurationAudit, CurationError> {
        config.validate()?;
        let records = load_records(input).map_err(|e| CurationError::Dataset {
            source: e,
            audit: Box::default(),
        })?;
        let (records, audit) = stage1(records, config);
        let (records, audit) = match refine {
            Some(c) => {
                let (records, refined) =
                    stage2_refine(records, c.scorer, c.regenerator, config).map_err(|e| e.with_prior(&audit))?;
                (records, audit.then(refined))
            }
            None => (records, audit),
        };
        write_records(&records, output).map_err(|e| CurationError::Dataset {
            source: e,
            audit: Box::new(audit.clone()),
        })?;
        Ok(audit)
    })();
    match result {
        Ok(audit) => {
            write_audit(&audit, audit_path)?;
            Ok(audit)
        }
        Err(e) => {
            if let Some(partial) = e.partial_audit() {
                write_audit(partial, audit_path)?;
            }
            Err(e)
        }
    }
}
