//! Provenance header written at the top of every output file: the command,
//! a SHA-256 of the echoed configuration, and the configuration itself as
//! `# section.key = value` comment lines.

use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub fn config_hash(config: &RunConfig) -> String {
    let mut h = Sha256::new();
    for line in config.echo_lines() {
        h.update(line.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

pub fn render(command: &str, config: &RunConfig) -> String {
    let mut s = format!("# qaction {command}\n# config_sha256 = \"{}\"\n", config_hash(config));
    for line in config.echo_lines() {
        s.push_str("# ");
        s.push_str(&line);
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub command: String,
    pub hash: String,
    pub config: RunConfig,
}

/// Recovers the header of an output file and checks its hash.
pub fn parse(text: &str) -> Result<Header, CliError> {
    let bad = |m: &str| CliError::Config(format!("header: {m}"));
    let mut lines = text.lines().map_while(|l| l.strip_prefix("# "));
    let command = lines
        .next()
        .and_then(|l| l.strip_prefix("qaction "))
        .ok_or_else(|| bad("missing command line"))?
        .to_string();
    let hash = lines
        .next()
        .and_then(|l| l.strip_prefix("config_sha256 = \""))
        .and_then(|l| l.strip_suffix('"'))
        .ok_or_else(|| bad("missing config hash"))?
        .to_string();
    let body: Vec<&str> = lines.collect();
    let config = RunConfig::parse(&body.join("\n"))?;
    if config_hash(&config) != hash {
        return Err(bad("config hash does not match the echoed config"));
    }
    Ok(Header { command, hash, config })
}
