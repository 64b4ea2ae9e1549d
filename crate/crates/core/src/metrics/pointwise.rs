use crate::error::{Error, Result};
use crate::image::Image;
use crate::normalize::DataRangePolicy;

use super::{check_dims, Fingerprint, MetricScore};

pub(super) fn mae_values(r: &[f64], t: &[f64]) -> f64 {
    r.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>() / r.len() as f64
}

pub(super) fn mse_values(r: &[f64], t: &[f64]) -> f64 {
    r.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / r.len() as f64
}

pub(super) fn psnr_values(r: &[f64], t: &[f64], range: DataRangePolicy) -> Result<f64> {
    let l = range.resolve_values(r, t)?;
    let mse = mse_values(r, t);
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (l * l / mse).log10())
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, v: f64) {
        let t = self.s + v;
        if self.s.abs() >= v.abs() {
            self.c += (self.s - t) + v;
        } else {
            self.c += (v - t) + self.s;
        }
        self.s = t;
    }

    fn total(self) -> f64 {
        self.s + self.c
    }
}

fn compensated_mean(v: &[f64]) -> f64 {
    let mut s = Sum::default();
    v.iter().for_each(|&x| s.add(x));
    s.total() / v.len() as f64
}

// compensated sums keep the value stable under affine rescaling of either input
pub(super) fn pcc_values(r: &[f64], t: &[f64]) -> Result<f64> {
    let mr = compensated_mean(r);
    let mt = compensated_mean(t);
    let (mut rr, mut tt, mut rt) = (Sum::default(), Sum::default(), Sum::default());
    for (&a, &b) in r.iter().zip(t) {
        let (da, db) = (a - mr, b - mt);
        rr.add(da * da);
        tt.add(db * db);
        rt.add(da * db);
    }
    let (srr, stt, srt) = (rr.total(), tt.total(), rt.total());
    if srr == 0.0 || stt == 0.0 {
        return Err(Error::Degenerate(
            "pearson correlation of a constant image is undefined".into(),
        ));
    }
    Ok((srt / (srr.sqrt() * stt.sqrt())).clamp(-1.0, 1.0))
}

fn score(id: &str, value: f64, fp: Fingerprint) -> MetricScore {
    MetricScore::new(value, id, &fp)
}

fn metric_fp(id: &str) -> Fingerprint {
    let mut fp = Fingerprint::new();
    fp.insert("metric", id);
    fp
}

/// Mean absolute error.
pub fn mae(reference: &Image, test: &Image) -> Result<MetricScore> {
    check_dims(reference, test)?;
    Ok(score("mae", mae_values(reference.data(), test.data()), metric_fp("mae")))
}

/// Mean squared error.
pub fn mse(reference: &Image, test: &Image) -> Result<MetricScore> {
    check_dims(reference, test)?;
    Ok(score("mse", mse_values(reference.data(), test.data()), metric_fp("mse")))
}

/// `10 log10(L^2 / MSE)` with `L` from `range`; identical images give `+inf`.
pub fn psnr(reference: &Image, test: &Image, range: DataRangePolicy) -> Result<MetricScore> {
    check_dims(reference, test)?;
    let mut fp = metric_fp("psnr");
    fp.insert("range", range);
    Ok(score("psnr", psnr_values(reference.data(), test.data(), range)?, fp))
}

/// Pearson correlation over all pixel locations.
pub fn pcc(reference: &Image, test: &Image) -> Result<MetricScore> {
    check_dims(reference, test)?;
    Ok(score("pcc", pcc_values(reference.data(), test.data())?, metric_fp("pcc")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::{normalize, NormMethod};
    use proptest::prelude::*;

    fn img(v: &[f64]) -> Image {
        Image::new_2d(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn mae_examples() {
        let r = img(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(mae(&r, &r).unwrap().value, 0.0);
        assert_eq!(mae(&img(&[10.0; 3]), &img(&[13.0; 3])).unwrap().value, 3.0);
        assert_eq!(mae(&r, &img(&[1.0, 1.0, 2.0, 7.0])).unwrap().value, 1.25);
        assert!(mae(&r, &img(&[1.0])).is_err());
    }

    #[test]
    fn mse_examples() {
        let r = img(&[0.0, 0.0]);
        assert_eq!(mse(&r, &r).unwrap().value, 0.0);
        assert_eq!(mse(&r, &img(&[3.0, 4.0])).unwrap().value, 12.5);
        let c = 2.5;
        let shifted = r.map(|v| v + c).unwrap();
        assert_eq!(mse(&r, &shifted).unwrap().value, c * c);
    }

    #[test]
    fn psnr_examples() {
        let r = img(&[0.0, 255.0, 17.0]);
        let s = psnr(&r, &r, DataRangePolicy::Joint).unwrap();
        assert_eq!(s.value, f64::INFINITY);
        assert_eq!(s.value_string(), "inf");

        // MSE = L^2 -> 0 dB
        let a = img(&[0.0, 0.0]);
        let b = img(&[2.0, 2.0]);
        let v = psnr(&a, &b, DataRangePolicy::fixed(2.0).unwrap()).unwrap().value;
        assert!(v.abs() < 1e-12);

        // 255^2 / 65.025 = 1000 -> 30 dB
        let d = 65.025f64.sqrt();
        let v = psnr(&a, &img(&[d, -d]), DataRangePolicy::fixed(255.0).unwrap()).unwrap().value;
        assert!((v - 30.0).abs() < 1e-9, "{v}");

        let flat = img(&[1.0, 1.0]);
        assert!(psnr(&flat, &flat, DataRangePolicy::Joint).is_err());
    }

    #[test]
    fn pcc_examples() {
        let r = img(&[1.0, 4.0, 2.0, 8.0, 5.0]);
        assert!((pcc(&r, &r).unwrap().value - 1.0).abs() < 1e-15);
        let up = r.map(|v| 3.0 * v + 2.0).unwrap();
        assert!((pcc(&r, &up).unwrap().value - 1.0).abs() < 1e-12);
        let down = r.map(|v| -0.5 * v + 2.0).unwrap();
        assert!((pcc(&r, &down).unwrap().value + 1.0).abs() < 1e-12);
        assert!(matches!(pcc(&r, &img(&[2.0; 5])), Err(Error::Degenerate(_))));
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(-100.0f64..100.0, n),
                prop::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn pointwise_metrics_are_symmetric((a, b) in pair()) {
            let (a, b) = (img(&a), img(&b));
            prop_assert_eq!(mae(&a, &b).unwrap().value, mae(&b, &a).unwrap().value);
            prop_assert_eq!(mse(&a, &b).unwrap().value, mse(&b, &a).unwrap().value);
            if let (Ok(x), Ok(y)) = (pcc(&a, &b), pcc(&b, &a)) {
                prop_assert_eq!(x.value, y.value);
            }
        }

        #[test]
        fn psnr_shift_equals_log_ratio((a, b) in pair(), l1 in 0.5f64..500.0, ratio in 1.01f64..100.0) {
            let (a, b) = (img(&a), img(&b));
            prop_assume!(mse(&a, &b).unwrap().value > 0.0);
            let l2 = l1 * ratio;
            let p1 = psnr(&a, &b, DataRangePolicy::fixed(l1).unwrap()).unwrap().value;
            let p2 = psnr(&a, &b, DataRangePolicy::fixed(l2).unwrap()).unwrap().value;
            prop_assert!((p2 - p1 - 20.0 * (l2 / l1).log10()).abs() < 1e-9);
        }

        #[test]
        fn pcc_ignores_affine_normalization((a, b) in pair(), shift in -50.0f64..50.0, scale in 0.01f64..100.0) {
            let (a, b) = (img(&a), img(&b));
            let Ok(base) = pcc(&a, &b) else { return Ok(()); };
            for m in [NormMethod::MinMax, NormMethod::ZScore, NormMethod::custom(shift, scale).unwrap()] {
                let na = normalize(&a, m).unwrap();
                let nb = normalize(&b, m).unwrap();
                prop_assert!((pcc(&na, &b).unwrap().value - base.value).abs() < 1e-12);
                prop_assert!((pcc(&a, &nb).unwrap().value - base.value).abs() < 1e-12);
            }
        }
    }
}
