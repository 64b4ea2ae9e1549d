//! Plugging a custom metric into the registry. Learned perceptual metrics
//! would wrap a network here; this stand-in compares gradient magnitudes.

use std::sync::Arc;

use refsim::distort::{gaussian_blur, mirror_replace, Axis};
use refsim::harness::{generate_phantom, PhantomParams};
use refsim::metrics::{masked_evaluate_plugin, Fingerprint, MetricRegistry, ReferenceMetric};
use refsim::{Image, Mask, Rect};

/// Mean gradient-magnitude similarity, 1 for identical images.
struct GradientSimilarity {
    c: f64,
}

fn gradient_magnitude(img: &Image) -> Vec<f64> {
    let d = img.dims();
    let mut out = vec![0.0; img.len()];
    for y in 0..d.height {
        for x in 0..d.width {
            let gx = img.get((x + 1).min(d.width - 1), y, 0) - img.get(x.saturating_sub(1), y, 0);
            let gy = img.get(x, (y + 1).min(d.height - 1), 0) - img.get(x, y.saturating_sub(1), 0);
            out[y * d.width + x] = gx.hypot(gy);
        }
    }
    out
}

impl ReferenceMetric for GradientSimilarity {
    fn id(&self) -> &str {
        "gradient_sim"
    }

    fn fingerprint(&self) -> Fingerprint {
        let mut fp = Fingerprint::new();
        fp.insert("metric", "gradient_sim");
        fp.insert("c", self.c);
        fp
    }

    fn evaluate(&self, reference: &Image, test: &Image) -> refsim::Result<f64> {
        if reference.dims() != test.dims() || reference.dims().is_3d() {
            return Err(refsim::Error::DimsMismatch("gradient_sim needs equal 2D images".into()));
        }
        let (a, b) = (gradient_magnitude(reference), gradient_magnitude(test));
        let sum: f64 = a.iter().zip(&b).map(|(g, h)| (2.0 * g * h + self.c) / (g * g + h * h + self.c)).sum();
        Ok(sum / a.len() as f64)
    }
}

fn main() -> refsim::Result<()> {
    let mut registry = MetricRegistry::with_builtins();
    registry.register(Arc::new(GradientSimilarity { c: 100.0 }))?;
    let plugin = registry.get("gradient_sim").expect("registered");

    let phantom = generate_phantom(8, &PhantomParams::default())?;
    let r = &phantom.image;
    for (name, t) in [
        ("identical", r.clone()),
        ("blur2", gaussian_blur(r, 2.0)?),
        ("mirror", mirror_replace(r, Axis::Y)?),
    ] {
        println!("{name:>10}  {:.4}", plugin.evaluate(r, &t)?);
    }

    // plugins are windowed for masking purposes: rectangles only
    let dims = r.dims();
    let rect = Mask::from_rect(dims, &Rect::new_2d(40, 40, 100, 100))?;
    let s = masked_evaluate_plugin(plugin.as_ref(), r, &gaussian_blur(r, 2.0)?, &rect)?;
    println!("blur2 inside {}: {:.4}", s.params_fingerprint, s.value);
    assert!(masked_evaluate_plugin(plugin.as_ref(), r, r, &phantom.foreground_mask).is_err());
    Ok(())
}
