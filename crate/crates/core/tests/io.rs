mod common;

use std::fs;

use common::{awkward, bits, random_model};

use otrom::io::*;
use otrom::measure::{Grid, Trajectory};
use otrom::transport::{PlanEntries, TransportPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn trajectories_round_trip_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dir = tempfile::tempdir().unwrap();
    for case in 0..10 {
        let (nx, nz) = (rng.gen_range(1..9), rng.gen_range(1..9));
        let grid = Grid::new(
            nx,
            nz,
            rng.gen_range(1e-3..2.0),
            rng.gen_range(1e-3..2.0),
            (awkward(&mut rng), rng.gen()),
        )
        .unwrap();
        let n_t = rng.gen_range(1..6);
        let fields = (0..n_t)
            .map(|_| (0..grid.len()).map(|_| awkward(&mut rng)).collect())
            .collect();
        let traj = Trajectory::new(grid, rng.gen_range(1e-4..1.0), fields).unwrap();
        let path = dir.path().join(format!("t{case}.otrm"));
        save_trajectory(&path, &traj).unwrap();
        let back = load_trajectory(&path).unwrap();
        assert_eq!(back.grid(), traj.grid());
        assert_eq!(back.dt().to_bits(), traj.dt().to_bits());
        for k in 0..traj.len() {
            assert_eq!(bits(back.field(k)), bits(traj.field(k)));
        }
        assert_eq!(fs::read(&path).unwrap(), encode_trajectory(&back));
    }
}

#[test]
fn truncated_and_foreign_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::unit_square(4, 4).unwrap();
    let traj = Trajectory::new(grid, 0.5, vec![vec![1.0; 16]; 3]).unwrap();
    let bytes = encode_trajectory(&traj);
    let path = dir.path().join("cut.otrm");
    fs::write(&path, &bytes[..bytes.len() - 100]).unwrap();
    assert!(matches!(
        load_trajectory(&path),
        Err(IoError::TruncatedFile { .. })
    ));
    fs::write(
        &path,
        encode_plan(&TransportPlan::from_dense(1, 1, vec![1.0]).unwrap()),
    )
    .unwrap();
    assert!(matches!(
        load_trajectory(&path),
        Err(IoError::BadMagic { .. })
    ));
    let missing = load_trajectory(dir.path().join("absent.otrm")).unwrap_err();
    assert!(missing.is_not_found());
}

#[test]
fn plans_round_trip_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let dir = tempfile::tempdir().unwrap();
    for case in 0..10 {
        let (rows, cols) = (rng.gen_range(1..12), rng.gen_range(1..12));
        let entries = if case % 2 == 0 {
            PlanEntries::Dense(
                (0..rows * cols)
                    .map(|_| {
                        if rng.gen_bool(0.3) {
                            0.0
                        } else {
                            awkward(&mut rng).abs()
                        }
                    })
                    .collect(),
            )
        } else {
            let mut t = Vec::new();
            for i in 0..rows {
                for j in 0..cols {
                    if rng.gen_bool(0.4) {
                        t.push((i as u32, j as u32, rng.gen::<f64>() * 1e-3));
                    }
                }
            }
            PlanEntries::Sparse(t)
        };
        let plan = TransportPlan::from_parts(
            rows,
            cols,
            entries,
            rng.gen(),
            rng.gen_range(0..10_000),
            rng.gen::<f64>() * 1e-9,
        )
        .unwrap();
        let path = dir.path().join(format!("p{case}.plan"));
        save_plan(&path, &plan).unwrap();
        let back = load_plan(&path).unwrap();
        assert_eq!(back, plan);
        assert_eq!(bits(&back.to_dense()), bits(&plan.to_dense()));
        assert_eq!(back.epsilon_used().to_bits(), plan.epsilon_used().to_bits());
        assert_eq!(
            back.marginal_violation().to_bits(),
            plan.marginal_violation().to_bits()
        );
    }
}

#[test]
fn models_round_trip_bit_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let root = tempfile::tempdir().unwrap();
    for case in 0..10 {
        let (model, traj) = random_model(&mut rng);
        let dir = root.path().join(format!("m{case}"));
        save_model(&dir, &model).unwrap();
        let back = load_model(&dir).unwrap();
        assert_eq!(back, model, "case {case}");
        for k in 0..=8 {
            let t = traj.t_final() * k as f64 / 8.0;
            assert_eq!(
                bits(&back.infer(t).unwrap().values),
                bits(&model.infer(t).unwrap().values)
            );
            if model.corrector.is_some() {
                assert_eq!(
                    bits(&back.infer_corrected(t).unwrap().values),
                    bits(&model.infer_corrected(t).unwrap().values)
                );
            }
        }
        // Saving the reloaded model reproduces every file byte for byte.
        let again = root.path().join(format!("m{case}_again"));
        save_model(&again, &back).unwrap();
        let mut names: Vec<_> = fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for name in names {
            assert_eq!(
                fs::read(dir.join(&name)).unwrap(),
                fs::read(again.join(&name)).unwrap(),
                "{name:?}"
            );
        }
    }
}

#[test]
fn missing_model_is_reported_as_missing() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_model(dir.path().join("nothing"))
        .unwrap_err()
        .is_not_found());
}
