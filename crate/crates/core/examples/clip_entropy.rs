//! Entropy of the rescaled paper clip as it opens up into two sheets.

use csflab_core::exact::ExactFamily;
use csflab_core::gaussian::{entropy, EntropySearch};
use csflab_core::geometry::SpacingPolicy;

fn main() -> csflab_core::Result<()> {
    let policy = SpacingPolicy::Uniform { n: 800 };
    for tau in [-1.0, -2.0, -4.0, -6.0, -8.0] {
        let curve = ExactFamily::PaperClip.sample_rescaled(tau, &policy)?;
        let d = entropy(&curve, &EntropySearch::default())?;
        println!(
            "tau = {tau:>5.1}  F = {:.6}  at x0 = ({:.3}, {:.3}), lambda = {:.3}",
            d.value, d.x0.x, d.x0.y, d.scale
        );
    }
    Ok(())
}
