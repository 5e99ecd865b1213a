use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use saaci::bench::{self, aggregate, coverage_csv, coverage_table, run_replication, run_study, ExperimentConfig, Study, CSV_HEADER, CSV_VERSION_LINE};
use saaci::gauss::{build_projector, delta_half_widths, mvn_sample, CovMatrix};
use saaci::inference::{cell_anchor, lambda_hat, CellEstimate};
use saaci::polyhedral::{cell_of_point, normal_map_pieces, tangent_cone_k0, BoxSet, Cell, CoordState};
use saaci::pwnormal::{asymptotic_ci, PiecewiseNormalModel};
use saaci::svi::{jacobian_mn, SaaSolution};

fn config(kind: &str, n: usize, reps: usize) -> ExperimentConfig {
    bench::parse_config(&format!(
        "[problem]\nkind = \"{kind}\"\nn = {n}\n\n[study]\nsample_size = 500\nreplications = {reps}\nseed = 99\nbudgets = [[0.025, 0.025], [0.01, 0.04]]\n"
    ))
    .unwrap()
}

// Fixed true operator on R^4 over the box [0, 2]^4 with z0 touching each kind of cell piece.
fn setup() -> (BoxSet, DMatrix<f64>, DVector<f64>, CovMatrix) {
    let set = BoxSet::new(vec![0.0; 4], vec![2.0; 4]).unwrap();
    let l = DMatrix::from_row_slice(4, 4, &[2.0, 0.3, 0.1, 0.0, 0.2, 1.5, 0.4, 0.1, 0.0, 0.3, 1.8, 0.2, 0.1, 0.0, 0.2, 1.2]);
    let z0 = DVector::from_column_slice(&[0.7, -0.4, 0.0, 2.5]);
    let b = DMatrix::from_row_slice(4, 4, &[1.0, 0.2, 0.0, 0.1, 0.0, 0.8, 0.3, 0.0, 0.2, 0.0, 0.9, 0.1, 0.0, 0.1, 0.0, 0.7]);
    let sigma = CovMatrix::new(&b * b.transpose()).unwrap();
    (set, l, z0, sigma)
}

#[test]
fn inference_reproduces_the_asymptotic_interval_of_the_limit_law() {
    let (set, l, z0, sigma) = setup();
    let x0 = set.project(&z0);
    let cell = cell_of_point(&set, &z0, 1e-12).unwrap();
    assert_eq!(cell.states(), &[CoordState::Inside, CoordState::Below, CoordState::AtLower, CoordState::Above]);
    let k0 = tangent_cone_k0(&set, &x0, &z0, 1e-12).unwrap();
    let gamma = normal_map_pieces(l.clone(), &k0).unwrap();
    let n_samples = 400;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let y = mvn_sample(&sigma, &mut rng);
        let z_n = &z0 + gamma.inverse_apply(&y).unwrap() / (n_samples as f64).sqrt();
        let jac = jacobian_mn(&l, &z_n, &set, 1e-12).unwrap();
        let sol = SaaSolution::from_parts(&set, z_n.clone(), jac, sigma.clone(), n_samples).unwrap();
        let est = CellEstimate::new(&sol, &cell, &set, lambda_hat(&sol).unwrap()).unwrap();
        let ours = est.z_intervals(0.05, 0.1).unwrap();

        let model = PiecewiseNormalModel::new(gamma.clone(), sigma.clone(), cell_anchor(&sol, &cell, &set)).unwrap();
        let theirs = asymptotic_ci(&model, &z_n, 0.1, n_samples).unwrap();
        for j in 0..4 {
            assert!((ours.center[j] - theirs.center[j]).abs() < 1e-12);
            assert!((ours.half_widths[j] - theirs.half_widths[j]).abs() < 1e-12);
        }
    }
}

fn random_point_of(cell: &Cell, set: &BoxSet, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(cell.ambient_dim(), |j, _| {
        let (l, u) = (set.lower()[j], set.upper()[j]);
        match cell.states()[j] {
            CoordState::Below => l - rng.random_range(0.01..3.0),
            CoordState::AtLower => l,
            CoordState::Inside => rng.random_range(l + 1e-3..u - 1e-3),
            CoordState::AtUpper => u,
            CoordState::Above => u + rng.random_range(0.01..3.0),
            CoordState::Fixed => rng.random_range(-5.0..5.0),
        }
    })
}

#[test]
fn intervals_do_not_depend_on_the_anchor() {
    let (set, l, _, sigma) = setup();
    let z_n = DVector::from_column_slice(&[0.71, -0.38, 0.02, 2.47]);
    let jac = jacobian_mn(&l, &z_n, &set, 1e-12).unwrap();
    let sol = SaaSolution::from_parts(&set, z_n.clone(), jac, sigma, 300).unwrap();
    let cell = Cell::new(vec![CoordState::Inside, CoordState::Below, CoordState::AtLower, CoordState::Above]);
    let lambda = lambda_hat(&sol).unwrap();
    let est = CellEstimate::new(&sol, &cell, &set, lambda.clone()).unwrap();
    let base = est.z_intervals(0.05, 0.05).unwrap();
    let p = build_projector(&cell.parallel_subspace(), None, &lambda).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let a0 = random_point_of(&cell, &set, &mut rng);
        let center = p.apply(&(&z_n - &a0)) + &a0;
        let widths: Vec<f64> = delta_half_widths(&p, 0.05).unwrap().iter().map(|d| d / (300f64).sqrt()).collect();
        for j in 0..4 {
            assert!((center[j] - base.center[j]).abs() < 1e-10);
            assert!((widths[j] - base.half_widths[j]).abs() < 1e-10);
        }
    }
}

#[test]
fn larger_alpha2_never_widens_intervals_on_a_fixed_cell() {
    let (set, l, _, sigma) = setup();
    let z_n = DVector::from_column_slice(&[0.71, -0.38, 0.02, 2.47]);
    let jac = jacobian_mn(&l, &z_n, &set, 1e-12).unwrap();
    let sol = SaaSolution::from_parts(&set, z_n, jac, sigma, 300).unwrap();
    let cell = Cell::new(vec![CoordState::Inside, CoordState::Below, CoordState::AtLower, CoordState::Above]);
    let est = CellEstimate::new(&sol, &cell, &set, lambda_hat(&sol).unwrap()).unwrap();
    let total = 0.05;
    let mut prev: Option<Vec<f64>> = None;
    for a1 in [0.04, 0.03, 0.025, 0.01] {
        let w = est.z_intervals(a1, total - a1).unwrap().half_widths;
        if let Some(p) = prev {
            for j in 0..4 {
                assert!(w[j] <= p[j]);
            }
        }
        prev = Some(w);
    }
}

#[test]
fn replications_are_deterministic() {
    let study = Study::prepare(config("lcp-mixed", 9, 6), None).unwrap();
    let a = run_replication(&study, 4);
    let b = run_replication(&study, 4);
    assert_eq!(a.outcome, b.outcome);
    let one = run_study(&study, 1).unwrap();
    let three = run_study(&study, 3).unwrap();
    let s1 = coverage_csv(&aggregate(&study, &one));
    let s3 = coverage_csv(&aggregate(&study, &three));
    assert_eq!(s1, s3);
    assert!(s1.starts_with(&format!("{CSV_VERSION_LINE}\n")));
    assert_eq!(s1.lines().nth(2).unwrap(), CSV_HEADER);
    // 2 budgets x 2 targets x 9 coordinates.
    assert_eq!(s1.lines().count(), 3 + 36);
}

#[test]
fn mixed_family_active_sets_and_inactive_coverage() {
    let study = Study::prepare(config("lcp-mixed", 10, 40), None).unwrap();
    assert_eq!(study.active_z, (0..7).collect::<Vec<_>>());
    assert_eq!(study.active_x, vec![0, 1]);
    let records = run_study(&study, 2).unwrap();
    let s = aggregate(&study, &records);
    assert_eq!(s.completed + s.excluded.len(), 40);
    for b in &s.budgets {
        for &j in &s.inactive_z {
            assert!(b.intervals.z_coverage(j) >= 0.95, "coordinate {j}");
        }
    }
}

#[test]
fn vertex_family_reports_point_intervals_when_the_vertex_is_selected() {
    let study = Study::prepare(config("lcp-zero", 10, 10), None).unwrap();
    assert!(study.active_z.is_empty());
    let vertex = Cell::new(vec![CoordState::AtLower; 10]);
    let mut seen = 0;
    for r in 0..10 {
        let rec = run_replication(&study, r);
        let data = rec.outcome.unwrap();
        for b in &data.budgets {
            if b.cell == vertex {
                seen += 1;
                assert!(b.z_half_width.iter().chain(&b.x_half_width).all(|w| *w == 0.0));
                assert!(b.z_hit.iter().chain(&b.x_hit).all(|h| *h));
            }
        }
    }
    assert!(seen > 0);
    let table = coverage_table(&aggregate(&study, &run_study(&study, 1).unwrap()));
    assert!(table.contains("(empty active set)"));
}

#[test]
fn five_number_summaries() {
    let study = Study::prepare(config("lcp-two-active", 6, 5), None).unwrap();
    let mut records = run_study(&study, 1).unwrap();
    // Force every interval to hit.
    for r in &mut records {
        if let Ok(d) = &mut r.outcome {
            for b in &mut d.budgets {
                b.z_hit.iter_mut().for_each(|h| *h = true);
            }
        }
    }
    let s = aggregate(&study, &records);
    let f = s.budgets[0].intervals.z_summary(&s.active_z).unwrap();
    assert_eq!(f.as_array(), [1.0; 5]);
    let single = s.budgets[0].intervals.z_summary(&[3]).unwrap();
    assert_eq!(single.min, single.max);
}
