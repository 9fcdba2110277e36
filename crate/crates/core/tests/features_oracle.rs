use fallcascade::dataset::{synth_generate, Label, Sample, SynthSpec};
use fallcascade::preprocess::{extract_features, extract_window, Axis, PlaneConvention, Window, WindowSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn central(xs: &[f64], k: i32) -> f64 {
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mu).powi(k)).sum::<f64>() / n
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let saa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let sbb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    sab / (saa * sbb).sqrt()
}

/// Textbook evaluation of the 54 features, laid out feature-major over
/// (x, y, z, norm, verti, hori).
fn oracle(w: &Window, planes: &PlaneConvention) -> Vec<f64> {
    let get = |s: &Sample, a: Axis| match a {
        Axis::X => s.ax,
        Axis::Y => s.ay,
        Axis::Z => s.az,
    };
    let chans: Vec<Vec<f64>> = vec![
        w.samples.iter().map(|s| s.ax).collect(),
        w.samples.iter().map(|s| s.ay).collect(),
        w.samples.iter().map(|s| s.az).collect(),
        w.samples.iter().map(|s| (s.ax.powi(2) + s.ay.powi(2) + s.az.powi(2)).sqrt()).collect(),
        w.samples
            .iter()
            .map(|s| get(s, planes.coronal.0).hypot(get(s, planes.coronal.1)))
            .collect(),
        w.samples.iter().map(|s| s.ay.hypot(s.az)).collect(),
    ];
    let mut out = vec![0.0; 54];
    for (c, x) in chans.iter().enumerate() {
        let n = x.len() as f64;
        let var = central(x, 2);
        let max = x.iter().cloned().fold(f64::MIN, f64::max);
        let min = x.iter().cloned().fold(f64::MAX, f64::min);
        out[c] = x.iter().sum::<f64>() / n;
        out[6 + c] = var.sqrt();
        out[12 + c] = var;
        out[18 + c] = max;
        out[24 + c] = min;
        out[30 + c] = max - min;
        out[36 + c] = central(x, 4) / var.powi(2) - 3.0;
        out[42 + c] = central(x, 3) / var.powf(1.5);
    }
    for (k, (a, b)) in [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)].into_iter().enumerate() {
        out[48 + k] = corr(&chans[a], &chans[b]);
    }
    out
}

fn assert_close(got: &[f64], want: &[f64], ctx: &str) {
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "{ctx}: feature {i}: {g} vs {w}");
    }
}

#[test]
fn synthetic_windows_match_oracle() {
    let ds = synth_generate(&SynthSpec {
        n_subjects: 2,
        falls_per_subject: 5,
        adls_per_subject: 5,
        ..Default::default()
    })
    .unwrap();
    for planes in [PlaneConvention::default(), PlaneConvention { coronal: (Axis::Z, Axis::X) }] {
        for t in &ds.traces {
            let w = extract_window(t, &WindowSpec::FALLALLD);
            let f = extract_features(&w, &planes);
            assert_close(f.as_slice(), &oracle(&w, &planes), &t.trial_id);
        }
    }
}

#[test]
fn random_windows_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..50 {
        let n = rng.random_range(5..400);
        let scale = rng.random_range(0.01..8.0);
        let samples = (0..n)
            .map(|_| {
                Sample::new(
                    rng.random_range(-scale..scale),
                    rng.random_range(-scale..scale) + 1.0,
                    rng.random_range(-scale..scale),
                )
            })
            .collect();
        let w = Window { samples, impact_index: 0, label: Label::Fall, subject_id: "S".into(), trial_id: "r".into() };
        let planes = PlaneConvention::default();
        assert_close(extract_features(&w, &planes).as_slice(), &oracle(&w, &planes), &format!("trial {trial}"));
    }
}
