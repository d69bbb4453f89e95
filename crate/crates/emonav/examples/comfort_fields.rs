//! Comfort radii and oriented Gaussian personal-space fields: multiplier
//! arithmetic, field evaluation, and costmap rasterization.
//!
//! Run with: `cargo run --example comfort_fields`

use emonav::emotionctx::EmotionContext;
use emonav::gaitlab::Emotion;
use emonav::proxemics::{
    comfort_multiplier, gauss_coeffs, profile_value, rasterize, ProxemicsConfig, SpatialProfile,
};
use emonav::simworld::OccupancyGrid;

fn main() -> emonav::Result<()> {
    let cfg = ProxemicsConfig::default();

    println!("comfort radius per one-hot emotion (view group 0):");
    for emotion in Emotion::ALL {
        let ctx = EmotionContext::one_hot(emotion, 0);
        println!("  {:8} -> {:.4} m", emotion.name(), comfort_multiplier(&ctx, &cfg)?);
    }
    let away = EmotionContext::one_hot(Emotion::Angry, 2);
    println!("  facing away (group 2) -> {:.4} m", comfort_multiplier(&away, &cfg)?);

    let (k1, k2, k3) = gauss_coeffs(std::f64::consts::PI / 4.0, 1.0, 0.5)?;
    println!("\ncoefficients at 45 degrees, sigma 1.0 / 0.5: k1={k1:.3} k2={k2:.3} k3={k3:.3}");

    let profile = SpatialProfile::new((3.0, 2.0), 0.9, 0.9, 0.6, 0.9)?;
    println!("field along the facing direction:");
    for step in 0..5 {
        let d = step as f64 * 0.45;
        let (x, y) = (3.0 + d * 0.9f64.cos(), 2.0 + d * 0.9f64.sin());
        println!("  {:4.2} m ahead -> {:.4}", d, profile_value(&profile, x, y));
    }

    let grid = OccupancyGrid::new((0.0, 0.0), 0.1, 60, 40);
    let second = SpatialProfile::new((1.5, 1.5), 4.0, 1.1, 0.75, 1.12)?;
    let costmap = rasterize(&[profile, second], &grid);
    let (ix, iy) = costmap.argmax_cell();
    println!(
        "\nrasterized 2 profiles onto a {}x{} costmap; peak {:.3} at cell ({ix},{iy})",
        costmap.width(),
        costmap.height(),
        costmap.value(ix, iy)
    );
    let out = std::env::temp_dir().join("emonav-example").join("costmap.grid");
    std::fs::create_dir_all(out.parent().unwrap())?;
    costmap.export(&out)?;
    println!("exported to {}", out.display());
    Ok(())
}
