use proptest::prelude::*;

use smclab::avi::{natural_residual, solve_box_avi, BoxAvi};
use smclab::controllers::{u_eq_explicit, u_s_implicit};
use smclab::linops::{expm, is_p_matrix, psi, solve, spectral_bounds, vec as v};
use smclab::metrics::variation_step;
use smclab::{sample, Benchmark2D, Mat, Plant};

fn mat_from(n: usize, data: &[f64]) -> Mat {
    Mat::new(n, n, data[..n * n].to_vec()).unwrap()
}

fn square(max_n: usize, range: f64) -> impl Strategy<Value = Mat> {
    (1..=max_n).prop_flat_map(move |n| {
        prop::collection::vec(-range..range, n * n).prop_map(move |d| mat_from(n, &d))
    })
}

/// `GᵀG + δI + K − Kᵀ`, positive definite and generally non-symmetric.
fn pd(max_n: usize) -> impl Strategy<Value = Mat> {
    (1..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0..1.0f64, n * n),
            prop::collection::vec(-2.0..2.0f64, n * n),
            0.05..1.0f64,
        )
            .prop_map(move |(g, k, d)| {
                let g = mat_from(n, &g);
                let k = mat_from(n, &k);
                g.transpose()
                    .matmul(&g)
                    .unwrap()
                    .add(&Mat::identity(n).scale(d))
                    .unwrap()
                    .add(&k.sub(&k.transpose()).unwrap())
                    .unwrap()
            })
    })
}

fn max_diff(a: &Mat, b: &Mat) -> f64 {
    a.sub(b).unwrap().max_abs()
}

fn brute_force_count(m: &Mat, q: &[f64], alpha: f64) -> usize {
    let p = q.len();
    let mut found = 0;
    'pattern: for code in 0..3usize.pow(p as u32) {
        let st: Vec<usize> = (0..p).map(|i| (code / 3usize.pow(i as u32)) % 3).collect();
        let free: Vec<usize> = (0..p).filter(|&i| st[i] == 1).collect();
        let mut z: Vec<f64> = st.iter().map(|&s| if s == 0 { -alpha } else if s == 2 { alpha } else { 0.0 }).collect();
        if !free.is_empty() {
            let k = free.len();
            let mut a = Mat::zeros(k, k);
            let mut b = vec![0.0; k];
            for (r, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    a[(r, c)] = m[(i, j)];
                }
                b[r] = -q[i] - (0..p).filter(|j| st[*j] != 1).map(|j| m[(i, j)] * z[j]).sum::<f64>();
            }
            let Ok(sol) = solve(&a, &b) else { continue 'pattern };
            for (r, &i) in free.iter().enumerate() {
                z[i] = sol[r];
            }
        }
        let w: Vec<f64> = (0..p).map(|i| q[i] + (0..p).map(|j| m[(i, j)] * z[j]).sum::<f64>()).collect();
        let tol = 1e-11;
        let ok = (0..p).all(|i| match st[i] {
            0 => w[i] > tol,
            2 => w[i] < -tol,
            _ => z[i].abs() < alpha - tol,
        });
        found += usize::from(ok);
    }
    found
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn expm_semigroup(m in square(5, 1.0), s in 0.0..1.0f64, t in 0.0..1.0f64) {
        // shift into the left half plane for a stable matrix
        let shift = m.norm_inf() + 0.1;
        let m = m.sub(&Mat::identity(m.rows()).scale(shift)).unwrap();
        let lhs = expm(&m, s).unwrap().matmul(&expm(&m, t).unwrap()).unwrap();
        let rhs = expm(&m, s + t).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-10);
    }

    #[test]
    fn a_psi_is_expm_minus_identity(a in square(5, 2.0), h in 1e-4..1.0f64) {
        let lhs = a.matmul(&psi(&a, h).unwrap()).unwrap();
        let rhs = expm(&a, h).unwrap().sub(&Mat::identity(a.rows())).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-10 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn p_matrix_has_no_sign_reversal(m in square(4, 2.0), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let n = m.rows();
        let declared = is_p_matrix(&m).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut reversed = false;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = m.matvec(&x).unwrap();
            if x.iter().zip(&y).all(|(a, b)| a * b <= 0.0) {
                reversed = true;
                break;
            }
        }
        if declared {
            prop_assert!(!reversed);
        }
    }

    #[test]
    fn pd_inverse_bound(m in pd(6), raw in prop::collection::vec(-10.0..10.0f64, 6)) {
        let n = m.rows();
        let x = &raw[..n];
        let beta = spectral_bounds(&m).unwrap().min_sym_eig;
        prop_assert!(beta > 0.0);
        let y = solve(&m, x).unwrap();
        prop_assert!(v::norm_2(&y) <= v::norm_2(x) / beta * (1.0 + 1e-10));
    }

    #[test]
    fn avi_exists_for_pd(m in pd(6), raw in prop::collection::vec(-5.0..5.0f64, 6), alpha in 0.1..5.0f64) {
        let q = raw[..m.rows()].to_vec();
        let avi = BoxAvi::new(m, q, alpha).unwrap();
        let s = solve_box_avi(&avi).unwrap();
        prop_assert!(s.z.iter().all(|z| z.abs() <= alpha));
        prop_assert!(natural_residual(&avi, &s.z) <= 1e-9);
    }

    #[test]
    fn avi_unique_pattern_for_p_matrix(m in pd(4), raw in prop::collection::vec(-5.0..5.0f64, 4), alpha in 0.1..3.0f64) {
        let q = raw[..m.rows()].to_vec();
        // strict counting may miss boundary-degenerate patterns; never more than one
        prop_assert!(brute_force_count(&m, &q, alpha) <= 1);
        prop_assert!(solve_box_avi(&BoxAvi::new(m, q, alpha).unwrap()).is_ok());
    }

    #[test]
    fn avi_solution_map_is_lipschitz_and_monotone(
        m in pd(4),
        q1 in prop::collection::vec(-5.0..5.0f64, 4),
        q2 in prop::collection::vec(-5.0..5.0f64, 4),
        alpha in 0.1..3.0f64,
    ) {
        let p = m.rows();
        let (q1, q2) = (q1[..p].to_vec(), q2[..p].to_vec());
        let beta = spectral_bounds(&m).unwrap().min_sym_eig;
        let s1 = solve_box_avi(&BoxAvi::new(m.clone(), q1.clone(), alpha).unwrap()).unwrap();
        let s2 = solve_box_avi(&BoxAvi::new(m.clone(), q2.clone(), alpha).unwrap()).unwrap();
        let dz = v::sub(&s1.z, &s2.z);
        // for positive-definite M the map is 1/β-Lipschitz in the 2-norm
        prop_assert!(v::norm_2(&dz) <= v::norm_2(&v::sub(&q1, &q2)) / beta * (1.0 + 1e-9) + 1e-12);
        let w1 = BoxAvi::new(m.clone(), q1, alpha).unwrap().affine(&s1.z);
        let w2 = BoxAvi::new(m, q2, alpha).unwrap().affine(&s2.z);
        prop_assert!(v::dot(&dz, &v::sub(&w1, &w2)) <= 1e-9);
    }

    #[test]
    fn variation_ignores_repeats(
        vals in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 2), 1..40),
        reps in prop::collection::vec(1usize..4, 40),
    ) {
        let refined: Vec<Vec<f64>> = vals
            .iter()
            .zip(&reps)
            .flat_map(|(x, &r)| std::iter::repeat(x.clone()).take(r))
            .collect();
        let a = variation_step(&vals);
        let b = variation_step(&refined);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn implicit_selection_in_sign_graph(s in -30.0..30.0f64, h in 0.01..0.3f64, alpha in 0.1..5.0f64) {
        let sp = sample(&Benchmark2D::with_alpha(alpha).plant, h).unwrap();
        let (u, st) = u_s_implicit(&sp, &[s]).unwrap();
        let (u, st) = (u[0], st[0]);
        if st > 0.0 {
            prop_assert_eq!(u, -alpha);
        } else if st < 0.0 {
            prop_assert_eq!(u, alpha);
        } else {
            prop_assert!(u.abs() <= alpha);
        }
        // σ̃ = σ + CB*·u
        let want = s + sp.cb_star[(0, 0)] * u;
        let want = if u.abs() < alpha { 0.0 } else { want };
        prop_assert!((st - want).abs() <= 1e-12 * (1.0 + s.abs()));
    }

    #[test]
    fn explicit_closed_loop_matrix_power(x0 in prop::collection::vec(-20.0..20.0f64, 2), h in 0.001..0.05f64) {
        let plant = Benchmark2D::new().plant;
        let sp = sample(&plant, h).unwrap();
        // Φ = e^{Ah} − ΨΠ_B A with Π_B = B(CB)^{-1}C
        let pib = plant.b().matmul(plant.c()).unwrap();
        let phi = sp.e_ah.sub(&sp.psi.matmul(&pib).unwrap().matmul(plant.a()).unwrap()).unwrap();
        let mut x = x0.clone();
        let mut y = x0;
        for _ in 0..10 {
            let u = u_eq_explicit(&sp, &x).unwrap();
            x = sp.step(&x, &u, &[0.0, 0.0]);
            y = phi.matvec(&y).unwrap();
        }
        let scale = v::norm_inf(&y).max(1.0);
        prop_assert!(v::norm_inf(&v::sub(&x, &y)) <= 1e-12 * scale);
    }

    #[test]
    fn sample_is_deterministic(a in square(4, 2.0), h in 1e-3..0.5f64) {
        let n = a.rows();
        let b = Mat::new(n, 1, (0..n).map(|i| if i == n - 1 { 1.0 } else { 0.0 }).collect()).unwrap();
        let c = Mat::new(1, n, vec![1.0; n]).unwrap();
        let plant = Plant::new(a.clone(), b.clone(), c.clone(), 1.0).unwrap();
        let s1 = sample(&plant, h).unwrap();
        let s2 = sample(&plant, h).unwrap();
        prop_assert_eq!(&s1.cb_star, &s2.cb_star);
        prop_assert_eq!(&s1.e_ah, &s2.e_ah);
        let composed = c.matmul(&psi(&a, h).unwrap().matmul(&b).unwrap()).unwrap();
        prop_assert_eq!(&s1.cb_star, &composed);
    }
}
