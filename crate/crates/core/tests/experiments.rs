use nalgebra::DMatrix;

use rankatlas::bilinear::BilinearMap;
use rankatlas::certify::{certify, nu, sigma, Verdict};
use rankatlas::experiments::{
    als_fit, run_experiment, sample_gaussian_tensor, terracini_generic_rank, AlsBudget, ExperimentConfig, ALS_FIT_TOL,
};
use rankatlas::linalg::{gaussian_matrix, gaussian_vector, rng_for};
use rankatlas::pencil::SearchBudget;
use rankatlas::tensor::Tensor3;

fn cp_tensor(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Tensor3 {
    let slices: Vec<_> = (0..c.nrows())
        .map(|k| a * DMatrix::from_diagonal(&c.row(k).transpose()) * b.transpose())
        .collect();
    Tensor3::from_slices(&slices).unwrap()
}

#[test]
fn gaussian_samples_are_centred_and_in_v() {
    for shape in [[3, 6, 3], [3, 5, 3], [4, 12, 4]] {
        let mut sum = 0.0;
        let mut count = 0usize;
        for s in 0..1000 {
            let t = sample_gaussian_tensor(shape, &mut rng_for(31, s));
            assert!(sigma(&t).is_ok());
            sum += t.data().iter().sum::<f64>();
            count += t.data().len();
        }
        let mean = sum / count as f64;
        assert!(mean.abs() < 3.0 / (count as f64).sqrt(), "{shape:?}: mean {mean}");
    }
}

#[test]
fn als_recovers_planted_rank_and_not_less() {
    let budget = AlsBudget::default();
    let (mut exact, mut gap) = (0, 0);
    for s in 0..10 {
        let mut rng = rng_for(32, s);
        let t = cp_tensor(&gaussian_matrix(&mut rng, 3, 6), &gaussian_matrix(&mut rng, 6, 6), &gaussian_matrix(&mut rng, 3, 6));
        if als_fit(&t, 6, &budget).unwrap() < 1e-6 {
            exact += 1;
        }
        if als_fit(&t, 5, &budget).unwrap() > 1e-2 {
            gap += 1;
        }
    }
    assert!(exact >= 8, "rank 6 fits: {exact}/10");
    assert!(gap >= 8, "rank 5 gaps: {gap}/10");
}

#[test]
fn terracini_matrix_shapes() {
    for (n, p) in [(2, 5), (4, 3), (6, 6)] {
        assert_eq!(terracini_generic_rank(1, n, p).unwrap(), n.min(p));
    }
    assert_eq!(terracini_generic_rank(2, 3, 3).unwrap(), 3);
    assert!(terracini_generic_rank(0, 3, 3).is_err());
}

#[test]
fn experiment_is_independent_of_thread_count() {
    let mut cfg = ExperimentConfig::new([3, 5, 3], 6, 17);
    cfg.restarts = 60;
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_experiment(&cfg).unwrap())
    };
    let one = run(1);
    let three = run(3);
    assert_eq!(one.csv().unwrap(), three.csv().unwrap());
    assert_eq!(one.summary_json(), three.summary_json());
    let total: f64 = one.frequencies.iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(one.rows.iter().all(|r| r.wall_ms == 0));
}

#[test]
fn als_agrees_with_rank_p_certificates() {
    let cfg = ExperimentConfig::new([3, 6, 3], 40, 21);
    let report = run_experiment(&cfg).unwrap();
    assert!(report.counts.rank_p >= 38);
    let agree = report.als_agrees_rank_p.unwrap();
    assert!(agree >= 0.9, "ALS agreement {agree}");

    let cfg = ExperimentConfig::new([4, 12, 4], 12, 22);
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.counts.rank_p, 12);
    let agree = report.als_agrees_rank_p.unwrap();
    assert!(agree >= 0.9, "ALS agreement {agree}");
}

/// A 3 x 5 x 3 tensor whose reduced pencil is a perturbed restriction of
/// quaternion multiplication, which is AFCR, so the rank exceeds 5.
fn afcr_backed_tensor(seed: u64) -> Tensor3 {
    let mut rng = rng_for(40, seed);
    let q = BilinearMap::hypercomplex_mult(4).unwrap().restrict(3, 3).unwrap().as_tensor();
    let noise = gaussian_vector(&mut rng, 36);
    let y = Tensor3::new(4, 3, 3, q.data().iter().zip(noise.iter()).map(|(a, b)| a + 0.05 * b).collect()).unwrap();
    let mut f2 = DMatrix::zeros(9, 5);
    f2.rows_mut(0, 5).fill_with_identity();
    f2.rows_mut(5, 4).copy_from(&nu(&y).unwrap());
    let mix = DMatrix::identity(3, 3) + gaussian_matrix(&mut rng, 3, 3).scale(0.2);
    Tensor3::from_flat2(&f2, 3).unwrap().left_mul(&mix).unwrap()
}

#[test]
fn als_cannot_fit_rank_p_when_rank_exceeds_p() {
    let budget = SearchBudget::default().seeded(3);
    let als = AlsBudget::default();
    let mut flagged = 0;
    let mut als_fails = 0;
    for s in 0..10 {
        let t = afcr_backed_tensor(s);
        if let Verdict::RankExceedsP(_) = certify(&t, &budget).unwrap() {
            flagged += 1;
            if als_fit(&t, 5, &als).unwrap() >= ALS_FIT_TOL {
                als_fails += 1;
            }
            assert!(als_fit(&t, 6, &als).unwrap() < ALS_FIT_TOL);
        }
    }
    assert_eq!(flagged, 10);
    assert!(als_fails >= 9, "{als_fails}/{flagged}");
}
