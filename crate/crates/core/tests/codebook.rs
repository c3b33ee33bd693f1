mod common;

use common::*;
use proptest::prelude::*;
use qgcode::codebook::*;
use qgcode::redundancy::Redundancy;
use qgcode::{Error, GaussianModel};

fn red() -> Redundancy {
    Redundancy::new(GaussianModel::default())
}

/// Independent largest-remainder normalization following the documented rule.
fn normalize_oracle(c: &[f64]) -> Vec<u32> {
    let total: f64 = c.iter().sum();
    let scaled: Vec<f64> = c.iter().map(|x| x / total * 65536.0).collect();
    let mut f: Vec<i64> = scaled.iter().map(|x| (x.floor() as i64).max(1)).collect();
    let rem: Vec<f64> = scaled.iter().zip(&f).map(|(x, &v)| x - v as f64).collect();
    let mut balance = 65536 - f.iter().sum::<i64>();
    let mut idx: Vec<usize> = (0..c.len()).collect();
    if balance > 0 {
        idx.sort_by(|&a, &b| rem[b].partial_cmp(&rem[a]).unwrap().then(a.cmp(&b)));
    } else {
        idx.sort_by(|&a, &b| rem[a].partial_cmp(&rem[b]).unwrap().then(a.cmp(&b)));
    }
    while balance != 0 {
        for &i in &idx {
            if balance > 0 {
                f[i] += 1;
                balance -= 1;
            } else if balance < 0 && f[i] > 1 {
                f[i] -= 1;
                balance += 1;
            }
            if balance == 0 {
                break;
            }
        }
    }
    f.into_iter().map(|v| v as u32).collect()
}

#[test]
fn range_examples() {
    let m = GaussianModel::default();
    let small = choose_range(&m, s(0.1), 2f64.powi(-16)).unwrap();
    assert!(small == 1 || small == 2);
    assert_eq!(choose_range(&m, s(1000.0), 2f64.powi(-16)).unwrap(), MAX_RANGE);
    // the returned R is the first one below the threshold
    for rho in [0.7, 3.0, 40.0] {
        let r = choose_range(&m, s(rho), 2f64.powi(-16)).unwrap() as i64;
        assert!(m.tail_mass(s(rho), 2 * r - 1).unwrap() < 2f64.powi(-16));
        if r > 1 {
            assert!(m.tail_mass(s(rho), 2 * r - 3).unwrap() >= 2f64.powi(-16));
        }
    }
}

#[test]
fn range_precondition() {
    let m = GaussianModel::default();
    assert!(matches!(choose_range(&m, s(1.0), 0.01), Err(Error::Argument(_))));
}

#[test]
fn floors_and_quarters() {
    assert_eq!(normalize_frequencies(&[0.25; 4]).unwrap(), vec![16384; 4]);
    let f = normalize_frequencies(&[1e-7, 1.0 - 2e-7, 1e-7]).unwrap();
    assert_eq!(f, vec![1, 65534, 1]);
}

#[test]
fn small_sigma_vector_has_floor_escapes() {
    let m = GaussianModel::default();
    let v = build_code_vector(&m, s(0.1), 1).unwrap();
    assert_eq!(v.freqs(), &[1, 65534, 1]);
}

#[test]
fn integer_tables_stay_close_to_real_entropy() {
    let m = GaussianModel::default();
    let mut worst = (0.0, 0.0);
    for rho in log_grid(0.1, 1000.0, 33) {
        let r = choose_range(&m, s(rho), DEFAULT_TAIL_THRESHOLD).unwrap();
        let c = real_code_vector(&m, s(rho), r).unwrap();
        let v = build_code_vector(&m, s(rho), r).unwrap();
        let excess = v.cross_entropy(&c) - entropy_bits(&c);
        if excess > worst.1 {
            worst = (rho, excess);
        }
    }
    println!(
        "largest integer-table excess {:.3e} bits at rho={:.3}",
        worst.1, worst.0
    );
    assert!(worst.1 < 1e-3);
}

#[test]
fn integer_overhead_relative_bound() {
    let m = GaussianModel::default();
    let mut worst = (0.0, 0.0);
    for rho in log_grid(0.1, 1000.0, 33) {
        let r = choose_range(&m, s(rho), 2f64.powi(-16)).unwrap();
        let c = real_code_vector(&m, s(rho), r).unwrap();
        let v = build_code_vector(&m, s(rho), r).unwrap();
        let h = entropy_bits(&c);
        let excess = v.cross_entropy(&c) / h - 1.0;
        if excess > worst.1 {
            worst = (rho, excess);
        }
    }
    println!(
        "largest relative integer-table excess {:.3e} at rho={:.3}",
        worst.1, worst.0
    );
    assert!(worst.1 < 1e-4);
}

#[test]
fn escapes_are_smallest_for_mid_range() {
    let m = GaussianModel::default();
    for rho in [0.5, 1.0, 2.0, 3.0, 5.0] {
        let r = choose_range(&m, s(rho), DEFAULT_TAIL_THRESHOLD).unwrap();
        let v = build_code_vector(&m, s(rho), r).unwrap();
        let f = v.freqs();
        let inner = f[1..f.len() - 1].iter().min().unwrap();
        assert!(f[0] <= *inner && f[f.len() - 1] <= *inner, "rho={rho} {f:?}");
    }
}

#[test]
fn sixteen_cell_codebook() {
    let cb = build_codebook(&red(), transform(), 16, DEFAULT_TAIL_THRESHOLD).unwrap();
    assert_eq!(cb.n(), 16);
    assert!(cb.vectors().windows(2).all(|w| w[0].rho() < w[1].rho()));
    let bytes = cb.serialize();
    assert_eq!(Codebook::deserialize(&bytes).unwrap().serialize(), bytes);
    let again = build_codebook(&red(), transform(), 16, DEFAULT_TAIL_THRESHOLD).unwrap();
    assert_eq!(again.serialize(), bytes);
}

#[test]
fn flipped_byte_is_detected() {
    let cb = build_codebook(&red(), transform(), 16, DEFAULT_TAIL_THRESHOLD).unwrap();
    let mut bytes = cb.serialize();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    assert!(matches!(Codebook::deserialize(&bytes), Err(Error::Format(_))));
}

#[test]
fn memory_scales_with_cell_count() {
    let r = red();
    let per_cell: Vec<(usize, f64)> = [16usize, 32, 64, 128, 256]
        .iter()
        .map(|&n| {
            let cb = build_codebook(&r, transform(), n, DEFAULT_TAIL_THRESHOLD).unwrap();
            (n, cb.memory_bytes() as f64 / n as f64)
        })
        .collect();
    let reference = per_cell.last().unwrap().1;
    for (n, m) in &per_cell {
        assert!(rel(*m, reference) < 0.10, "N={n} bytes/cell={m} vs {reference}");
    }
}

#[test]
fn halving_cells_halves_memory() {
    let r = red();
    let m128 = build_codebook(&r, transform(), 128, DEFAULT_TAIL_THRESHOLD)
        .unwrap()
        .memory_bytes() as f64;
    let m256 = build_codebook(&r, transform(), 256, DEFAULT_TAIL_THRESHOLD)
        .unwrap()
        .memory_bytes() as f64;
    assert!(rel(m128 / m256, 0.5) < 0.05);
}

#[test]
fn dropping_index_bits_shrinks_memory_by_cell_ratio() {
    let cb = build_codebook(&red(), transform(), 256, DEFAULT_TAIL_THRESHOLD).unwrap();
    let coarse = cb.keep_every(8).unwrap();
    assert_eq!(coarse.n(), 32);
    let ratio = coarse.memory_bytes() as f64 / cb.memory_bytes() as f64;
    assert!(rel(ratio, 6.5 / 51.6) < 0.10, "ratio={ratio}");
}

#[test]
fn calibrated_memory_near_published_size() {
    let cal = calibrate_tail_threshold(&red(), transform(), 256, 51_600).unwrap();
    println!(
        "calibrated threshold {:e}: {} bytes for target {}",
        cal.tail_threshold, cal.memory_bytes, cal.target_bytes
    );
    assert!(rel(cal.memory_bytes as f64, 51_600.0) < 0.30);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn vectors_sum_to_total(rho in 0.1f64..1000.0, r in 1u32..600) {
        let m = GaussianModel::default();
        let v = build_code_vector(&m, s(rho), r).unwrap();
        prop_assert_eq!(v.len(), 2 * r as usize + 1);
        prop_assert_eq!(v.freqs().iter().map(|&f| f as u32).sum::<u32>(), 65536);
        prop_assert!(v.freqs().iter().all(|&f| f >= 1));
        let oracle = normalize_oracle(&real_code_vector(&m, s(rho), r).unwrap());
        prop_assert_eq!(v.freqs().iter().map(|&f| f as u32).collect::<Vec<_>>(), oracle);
    }
}
