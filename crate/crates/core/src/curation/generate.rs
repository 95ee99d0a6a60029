//! Reasoning-style response generation, either directly from the multimodal
//! input or through an intermediate image caption.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use super::CurationError;
use crate::clients::{GenerationClient, GenerationRequest};
use crate::dataset::GenerationRoute;

pub const CAPTION_INSTRUCTION: &str = "Describe the image in detail.";

#[derive(Clone)]
pub struct ReasoningClients {
    pub reasoner: Arc<dyn GenerationClient>,
    pub captioner: Arc<dyn GenerationClient>,
}

/// `direct`: the reasoner sees the prompt and image. `two_step`: the
/// captioner describes the image, and the reasoner sees the prompt followed
/// by that description, without the image.
pub fn stage3_generate(
    prompt: &str,
    image_ref: Option<&str>,
    route: GenerationRoute,
    clients: &ReasoningClients,
) -> Result<String, CurationError> {
    match route {
        GenerationRoute::Direct => clients
            .reasoner
            .generate(&GenerationRequest::new(prompt, image_ref))
            .map_err(|e| CurationError::Generation { route, source: e }),
        GenerationRoute::TwoStep => {
            let image = image_ref.ok_or_else(|| {
                CurationError::Precondition("two-step generation requires an image".into())
            })?;
            let description = clients
                .captioner
                .generate(&GenerationRequest::new(CAPTION_INSTRUCTION, Some(image)))
                .map_err(|e| CurationError::Generation { route, source: e })?;
            clients
                .reasoner
                .generate(&GenerationRequest::new(format!("{prompt}\n\n{description}"), None))
                .map_err(|e| CurationError::Generation { route, source: e })
        }
    }
}

/// Seeded Bernoulli route assignment.
pub fn assign_routes(n: usize, direct_probability: f64, seed: u64) -> Vec<GenerationRoute> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            if rng.gen_bool(direct_probability) {
                GenerationRoute::Direct
            } else {
                GenerationRoute::TwoStep
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clients::MockClient;

    fn clients() -> (Arc<MockClient>, Arc<MockClient>, ReasoningClients) {
        let r = Arc::new(MockClient::echo("reasoner"));
        let c = Arc::new(MockClient::echo("captioner"));
        let rc = ReasoningClients { reasoner: r.clone(), captioner: c.clone() };
        (r, c, rc)
    }

    #[test]
    fn direct_uses_reasoner_with_image() {
        let (r, c, rc) = clients();
        let out = stage3_generate("solve", Some("i.imgf"), GenerationRoute::Direct, &rc).unwrap();
        assert_eq!(out, "reasoner: solve [image]");
        assert_eq!(r.calls().len(), 1);
        assert!(c.calls().is_empty());
    }

    #[test]
    fn two_step_captions_once_and_hides_image() {
        let (r, c, rc) = clients();
        let out = stage3_generate("solve", Some("i.imgf"), GenerationRoute::TwoStep, &rc).unwrap();
        assert_eq!(c.calls().len(), 1);
        let calls = r.calls();
        assert_eq!(calls.len(), 1);
        assert_eq!(calls[0].image_ref, None);
        assert!(calls[0].prompt.contains("captioner: Describe the image"));
        assert!(out.starts_with("reasoner: solve\n\ncaptioner:"), "{out}");
    }

    #[test]
    fn two_step_without_image_is_precondition_error() {
        let (_, _, rc) = clients();
        assert!(matches!(
            stage3_generate("p", None, GenerationRoute::TwoStep, &rc),
            Err(CurationError::Precondition(_))
        ));
    }

    #[test]
    fn client_error_carries_route() {
        let rc = ReasoningClients {
            reasoner: Arc::new(MockClient::failing("reasoner")),
            captioner: Arc::new(MockClient::echo("captioner")),
        };
        let msg = stage3_generate("p", Some("i"), GenerationRoute::TwoStep, &rc)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("two_step"), "{msg}");
    }
}
