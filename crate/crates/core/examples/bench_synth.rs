//! Prints the refinement benchmark report for a synthetic 320x240 stream.

use mvrefine::codec::encode_sequence;
use mvrefine::refine::RefineConfig;
use mvrefine::synth::{synthesize, SceneKind, SynthSpec};

fn main() -> mvrefine::Result<()> {
    let scene = synthesize(&SynthSpec::new(SceneKind::Translate, 320, 240, 120))?;
    let (header, records) = encode_sequence(&scene.sequence, 12, 4)?;
    let threads = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1);
    let report = mvrefine::bench::benchmark_stream(&header, &records, 5, &RefineConfig::default(), threads)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}
