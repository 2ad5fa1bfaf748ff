// Renders one loudspeaker of the reference scene into a stemmed BRIR and
// analyses it.

use brirkit::metrics::analyze_brir;
use brirkit::render::{load_hrir, load_source_directivity, render_source, RenderOutput};
use brirkit::room::{paper_scene, DirectivityMode};

pub fn run_example() -> brirkit::Result<(RenderOutput, brirkit::metrics::MetricsReport)> {
    let scene = paper_scene(DirectivityMode::HeadShadowModel, None);
    let hrir = load_hrir(&scene, None)?;
    let src = load_source_directivity(&scene.sources[0], None, scene.sample_rate)?;
    let out = render_source(&scene, "S1", &src, &hrir)?;
    let report = analyze_brir(&out.brir.ir, &out.brir.tag.to_string(), "S1")?;
    Ok((out, report))
}

#[allow(dead_code)]
fn main() -> brirkit::Result<()> {
    let (out, report) = run_example()?;
    let d = &out.diagnostics;
    println!("{}: {} samples, {} images, transition {:.1} ms, late gain {:.3}",
        out.brir.tag, out.brir.ir.len(), d.images, d.transition_ms, d.late_gain);
    print!("{}", brirkit::metrics::format_table(std::slice::from_ref(&report)));
    Ok(())
}
