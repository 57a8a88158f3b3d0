use serde::Serialize;

/// Everything needed to reproduce the files written next to it.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: &'static str, config: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            command,
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            version: format!("kpls {} (krylov-pls {})", env!("CARGO_PKG_VERSION"), krylov_pls::VERSION),
        }
    }

    pub fn output(&mut self, name: Option<String>) {
        self.outputs.extend(name);
    }
}
