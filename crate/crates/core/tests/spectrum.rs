use std::path::PathBuf;

use nalgebra::DMatrix;
use ofbm::spectrum::{eigh_sorted, logscale_diagram, logscale_tsv, wavelet_variance, LOGSCALE_HEADER};
use ofbm::wavelet::{make_bank, pyramid};
use ofbm::{build_plan, synthesize, OfbmSpec, SamplePath, WaveletBank, WaveletSpectrum, WaveletVariant};
use proptest::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
struct GoldenW {
    seed: u64,
    nu: usize,
    hurst: Vec<f64>,
    octave: u32,
    k_count: usize,
    w: Vec<Vec<f64>>,
}

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/wavelet_variance_octave6.json")
}

/// Detail coefficients at octave `j` by direct correlation with the
/// equivalent filter ψ_j[t] = Σ_m g_m φ_{j-1}[t - 2^{j-1} m], φ_j built the
/// same way from h, φ_0 = δ.
fn direct_details(x: &[f64], bank: &WaveletBank, j: u32) -> Vec<f64> {
    let upsample = |prev: &[f64], taps: &[f64], stride: usize| -> Vec<f64> {
        let mut out = vec![0.0; prev.len() + stride * (taps.len() - 1)];
        for (m, tm) in taps.iter().enumerate() {
            for (t, p) in prev.iter().enumerate() {
                out[t + stride * m] += tm * p;
            }
        }
        out
    };
    let mut phi = vec![1.0];
    for level in 1..j {
        phi = upsample(&phi, bank.lowpass(), 1 << (level - 1));
    }
    let psi = upsample(&phi, bank.highpass(), 1 << (j - 1));
    let step = 1usize << j;
    let norm = 2f64.powf(-0.5 * f64::from(j));
    (0..)
        .map(|k| k * step)
        .take_while(|start| start + psi.len() <= x.len())
        .map(|start| norm * psi.iter().zip(&x[start..]).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

fn golden_inputs() -> (SamplePath, WaveletBank) {
    let spec = OfbmSpec::entrywise(vec![0.4, 0.8]).unwrap();
    let plan = build_plan(&spec, 1 << 12).unwrap();
    (synthesize(&plan, 42), make_bank(2, WaveletVariant::LeastAsymmetric).unwrap())
}

fn direct_w(path: &SamplePath, bank: &WaveletBank, j: u32) -> (DMatrix<f64>, usize) {
    let cols: Vec<Vec<f64>> =
        (0..path.n()).map(|i| direct_details(&path.data().column(i).iter().copied().collect::<Vec<_>>(), bank, j)).collect();
    let k = cols[0].len();
    let w = DMatrix::from_fn(path.n(), path.n(), |a, b| cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).sum::<f64>() / k as f64);
    (w, k)
}

fn rel_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    (a - b).amax() <= tol * b.amax()
}

#[test]
fn golden_wavelet_variance_at_octave_six() {
    let (path, bank) = golden_inputs();
    let coeffs = pyramid(&path, &bank, 6).unwrap();
    let w = wavelet_variance(&coeffs[5]).unwrap();
    let (w_direct, k_direct) = direct_w(&path, &bank, 6);
    assert_eq!(coeffs[5].k_count(), k_direct);
    assert!(rel_close(&w, &w_direct, 1e-12));

    let file = fixture_path();
    if std::env::var_os("OFBM_WRITE_FIXTURES").is_some() {
        let golden = GoldenW {
            seed: 42,
            nu: 1 << 12,
            hurst: vec![0.4, 0.8],
            octave: 6,
            k_count: k_direct,
            w: w_direct.row_iter().map(|r| r.iter().copied().collect()).collect(),
        };
        std::fs::write(&file, serde_json::to_string_pretty(&golden).unwrap()).unwrap();
    }
    let golden: GoldenW = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!((golden.seed, golden.nu, golden.octave, golden.k_count), (42, 1 << 12, 6, k_direct));
    let stored = DMatrix::from_fn(2, 2, |a, b| golden.w[a][b]);
    assert!(rel_close(&w, &stored, 1e-12), "{w} vs {stored}");
}

#[test]
fn pyramid_agrees_with_direct_filtering_at_every_octave() {
    let (path, bank) = golden_inputs();
    let bank4 = make_bank(4, WaveletVariant::ExtremalPhase).unwrap();
    for b in [&bank, &bank4] {
        let coeffs = pyramid(&path, b, 7).unwrap();
        for (j, oc) in (1..=7).zip(&coeffs) {
            let d = direct_details(&path.data().column(1).iter().copied().collect::<Vec<_>>(), b, j);
            assert_eq!(d.len(), oc.k_count());
            for (x, y) in d.iter().zip(oc.coeffs().column(1).iter()) {
                assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "j={j}: {x} vs {y}");
            }
        }
    }
}

#[test]
fn univariate_wavelet_variance_follows_power_law() {
    let spec = OfbmSpec::entrywise(vec![0.7]).unwrap();
    let plan = build_plan(&spec, 1 << 16).unwrap();
    let bank = make_bank(2, WaveletVariant::LeastAsymmetric).unwrap();
    let mut mean_log = [0.0; 10];
    let reps = 20;
    for r in 0..reps {
        let s = WaveletSpectrum::from_path(&synthesize(&plan, 500 + r), &bank, 10).unwrap();
        for (slot, o) in mean_log.iter_mut().zip(s.octaves()) {
            *slot += o.w[(0, 0)].log2() / reps as f64;
        }
    }
    // Slope of log₂ W(2^j) over j = 4..10 is 2h for normalized details.
    let js: Vec<f64> = (4..=10).map(f64::from).collect();
    let ys = &mean_log[3..10];
    let jm = js.iter().sum::<f64>() / js.len() as f64;
    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = js.iter().zip(ys).map(|(j, y)| (j - jm) * (y - ym)).sum::<f64>()
        / js.iter().map(|j| (j - jm).powi(2)).sum::<f64>();
    assert!((slope - 1.4).abs() < 0.05, "slope {slope}");
}

#[test]
fn logscale_tsv_layout() {
    let (path, bank) = golden_inputs();
    let s = WaveletSpectrum::from_path(&path, &bank, 8).unwrap();
    let rows = logscale_diagram(&s);
    assert_eq!(rows.len(), 16);
    let tsv = logscale_tsv(&rows);
    let mut lines = tsv.lines();
    assert_eq!(lines.next(), Some(LOGSCALE_HEADER));
    let first: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(first[0], "1");
    assert_eq!(first[1], "1");
    assert_eq!(first[2].parse::<f64>().unwrap(), rows[0].log2_lambda.unwrap());
}

fn random_spd(entries: &[f64], n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |i, j| entries[i * n + j]);
    &a * a.transpose() + DMatrix::identity(n, n) * 1e-3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_and_ordering_identities(n in 1usize..7, entries in prop::collection::vec(-3.0f64..3.0, 36)) {
        let w = random_spd(&entries, n);
        let e = eigh_sorted(&w).unwrap();
        let tr = w.trace();
        let sum: f64 = e.eigvals.iter().sum();
        prop_assert!((sum - tr).abs() <= 1e-10 * tr);
        prop_assert!(e.eigvals.windows(2).all(|p| p[0] <= p[1]));
        let top = e.eigvals[n - 1];
        prop_assert!(top <= tr * (1.0 + 1e-12) && tr <= n as f64 * top * (1.0 + 1e-12));
        prop_assert!((e.reconstruct() - &w).amax() <= 1e-10 * w.amax());
    }

    #[test]
    fn variance_scales_quadratically(c in 0.01f64..100.0, seed in 0u64..1000) {
        let spec = OfbmSpec::entrywise(vec![0.3, 0.6]).unwrap();
        let path = synthesize(&build_plan(&spec, 512).unwrap(), seed);
        let bank = make_bank(2, WaveletVariant::LeastAsymmetric).unwrap();
        let scaled = SamplePath::new(path.data() * c).unwrap();
        let a = WaveletSpectrum::from_path(&path, &bank, 4).unwrap();
        let b = WaveletSpectrum::from_path(&scaled, &bank, 4).unwrap();
        for (oa, ob) in a.octaves().iter().zip(b.octaves()) {
            prop_assert!(rel_close(&ob.w, &(&oa.w * (c * c)), 1e-12));
            for (la, lb) in oa.eigvals.iter().zip(&ob.eigvals) {
                prop_assert!((lb - la * c * c).abs() <= 1e-10 * lb.abs().max(1e-300));
            }
        }
    }
}
