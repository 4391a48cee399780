//! Pathway router: a pure total mapping from intent labels onto the three
//! execution pathways. Future per-utterance classifiers (memory need,
//! moment importance) would attach here by enriching RouteDecision.

use serde::{Deserialize, Serialize};

use super::model::IntentLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pathway {
    DeviceCommand,
    VisualPipeline,
    ConversationalPipeline,
}

impl Pathway {
    pub fn as_str(self) -> &'static str {
        match self {
            Pathway::DeviceCommand => "device_command",
            Pathway::VisualPipeline => "visual_pipeline",
            Pathway::ConversationalPipeline => "conversational_pipeline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteDecision {
    pub pathway: Pathway,
    pub intent: IntentLabel,
    pub confidence: f64,
}

/// Both question-like labels share the conversational pathway; only
/// device_control reaches firmware and only visual_query triggers capture.
pub fn route(intent: IntentLabel, confidence: f64) -> RouteDecision {
    let pathway = match intent {
        IntentLabel::DeviceControl => Pathway::DeviceCommand,
        IntentLabel::VisualQuery => Pathway::VisualPipeline,
        IntentLabel::GeneralQuestion | IntentLabel::Conversational => {
            Pathway::ConversationalPipeline
        }
    };
    RouteDecision { pathway, intent, confidence }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routing_table_is_total_and_fixed() {
        let expect = [
            (IntentLabel::DeviceControl, Pathway::DeviceCommand),
            (IntentLabel::VisualQuery, Pathway::VisualPipeline),
            (IntentLabel::GeneralQuestion, Pathway::ConversationalPipeline),
            (IntentLabel::Conversational, Pathway::ConversationalPipeline),
        ];
        for (intent, pathway) in expect {
            let d = route(intent, 0.9);
            assert_eq!(d.pathway, pathway, "pathway for {}", intent.as_str());
            assert_eq!(d.intent, intent, "intent passes through");
            assert_eq!(d.confidence, 0.9, "confidence passes through");
        }
    }
}
