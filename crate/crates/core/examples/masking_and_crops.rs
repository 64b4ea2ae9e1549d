//! Background pixels inflate similarity: the same mirrored phantom scored on
//! the full image, a symmetric crop, the foreground bounding box and the
//! foreground mask.

use refsim::distort::{crop_fraction_rect, mirror_replace, Axis};
use refsim::harness::{generate_phantom, PhantomParams, TumorHalf};
use refsim::metrics::{masked_evaluate, MetricOptions, MetricSpec};
use refsim::{bounding_box, Mask};

fn main() -> refsim::Result<()> {
    let params = PhantomParams::default().with_half(TumorHalf::Lower);
    let phantom = generate_phantom(4, &params)?;
    let test = mirror_replace(&phantom.image, Axis::Y)?;
    let dims = phantom.image.dims();

    let masks = [
        ("full", Mask::full(dims)),
        ("crop 3%", Mask::from_rect(dims, &crop_fraction_rect(&dims, 0.03)?)?),
        ("bbox", Mask::from_rect(dims, &bounding_box(&phantom.foreground_mask)?)?),
        ("foreground", phantom.foreground_mask.clone()),
    ];
    let mae = MetricSpec::from_id("mae", MetricOptions::default())?;
    let ssim = MetricSpec::from_id("ssim", MetricOptions::default())?;
    for (name, mask) in &masks {
        let m = masked_evaluate(&mae, &phantom.image, &test, mask)?.value;
        // ssim only accepts rectangular masks
        let s = match masked_evaluate(&ssim, &phantom.image, &test, mask) {
            Ok(s) => format!("{:.4}", s.value),
            Err(e) => format!("refused ({e})"),
        };
        println!("{name:>10}  mae {m:>8.3}  ssim {s}");
    }
    Ok(())
}
