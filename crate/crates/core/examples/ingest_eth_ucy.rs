//! Parses an ETH/UCY style annotation log (`frame ped x y`, annotated every
//! 10 frames) onto the 0.4 s tick grid.

use std::path::Path;

use dynbench::scene_source::{parse_eth_ucy, EthUcyOptions};

const LOG: &str = "\
0   1  1.00  2.00
0   2  8.00  0.50
10  1  1.45  2.10
10  2  7.60  0.55
20  1  1.90  2.20
20  2  7.20  0.60
30  1  2.35  2.30
40  2  6.40  0.70
";

fn main() -> anyhow::Result<()> {
    let scene = parse_eth_ucy(LOG, Path::new("inline.txt"), "inline", EthUcyOptions::default())?;
    println!("{}: dt {} s, {} ticks", scene.scene_id, scene.delta_t, scene.duration_ticks);
    for track in scene.agents() {
        let pts: Vec<String> = track
            .points()
            .iter()
            .map(|p| format!("t{}({:.2}, {:.2})", p.tick, p.pos.x, p.pos.y))
            .collect();
        println!("  {}: {}", track.agent_id, pts.join(" "));
    }
    // Ped 2 is missing at frame 30; the resampler interpolates across it.
    Ok(())
}
