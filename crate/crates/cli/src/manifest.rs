//! Provenance record written next to every output.

use std::collections::BTreeMap;

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: String,
    /// Wall-clock time of the run. Left out of the summaries so that reruns
    /// stay byte-identical; only the sidecar manifest file carries it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl RunManifest {
    /// Builds a manifest from any serializable argument struct; nested values
    /// are flattened to their JSON text.
    pub fn new(command: &str, params: &impl Serialize, seed: u64) -> Self {
        let parameters = match serde_json::to_value(params) {
            Ok(serde_json::Value::Object(map)) => map
                .into_iter()
                .filter(|(_, v)| !v.is_null())
                .map(|(k, v)| {
                    let text = match v {
                        serde_json::Value::String(s) => s,
                        other => other.to_string(),
                    };
                    (k, text)
                })
                .collect(),
            _ => BTreeMap::new(),
        };
        Self {
            command: command.to_string(),
            parameters,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: None,
        }
    }

    pub fn stamped(mut self) -> Self {
        self.timestamp = Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct P {
        tau: f64,
        model: &'static str,
        skip: Option<u8>,
    }

    #[test]
    fn flattens_parameters() {
        let m = RunManifest::new("analyze", &P { tau: 0.5, model: "xor", skip: None }, 7);
        assert_eq!(m.parameters["tau"], "0.5");
        assert_eq!(m.parameters["model"], "xor");
        assert!(!m.parameters.contains_key("skip"));
        let json = serde_json::to_string(&m).unwrap();
        assert!(!json.contains("timestamp"));
        assert!(m.stamped().timestamp.unwrap().ends_with('Z'));
    }
}
