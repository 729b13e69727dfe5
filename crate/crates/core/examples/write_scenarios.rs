//! Regenerate the scenario documents under `data/`.

use std::path::Path;

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let case = privflow_core::scenario::case_study();
    let reach = privflow_core::scenario::sensitive_reach();
    std::fs::write(dir.join("case_study.kb.json"), case.kb.to_json() + "\n")?;
    std::fs::write(dir.join("sensitive_reach.kb.json"), reach.kb.to_json() + "\n")?;
    Ok(())
}
