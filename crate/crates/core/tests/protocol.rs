mod common;

use std::collections::HashSet;

use memcl_core::{run_continual, TaskSequence};

#[test]
fn each_training_sample_is_presented_once() {
    let data = common::synthetic(8, 4);
    let cfg = common::small_config();
    let tasks = TaskSequence::default();
    let r = run_continual(&data, &data, &tasks, &cfg, 5, |_, _| {}).unwrap();
    assert_eq!(r.presented.len(), data.len());
    let unique: HashSet<u32> = r.presented.iter().copied().collect();
    assert_eq!(unique.len(), data.len());
    // Tasks arrive in order and never interleave.
    let task_of = |i: u32| data.labels[i as usize] / 2;
    assert!(r.presented.windows(2).all(|w| task_of(w[0]) <= task_of(w[1])));
    assert_eq!(r.network.shape.outputs, 2);
    assert_eq!(r.matrix.n_tasks(), 5);
}

#[test]
fn train_fraction_subsamples_each_task() {
    let data = common::synthetic(10, 4);
    let mut cfg = common::small_config();
    cfg.run.train_fraction = 0.25;
    let r = run_continual(&data, &data, &TaskSequence::default(), &cfg, 5, |_, _| {}).unwrap();
    // ceil(20 * 0.25) per task.
    assert_eq!(r.train_samples, 5 * 5);
}

#[test]
fn identical_seeds_reproduce_everything() {
    let data = common::synthetic(6, 7);
    let cfg = common::small_config();
    let tasks = TaskSequence::new(vec![[0, 1], [2, 3]]).unwrap();
    let a = run_continual(&data, &data, &tasks, &cfg, 11, |_, _| {}).unwrap();
    let b = run_continual(&data, &data, &tasks, &cfg, 11, |_, _| {}).unwrap();
    assert_eq!(a.matrix, b.matrix);
    assert_eq!(a.counters, b.counters);
    assert_eq!(a.presented, b.presented);
    let c = run_continual(&data, &data, &tasks, &cfg, 12, |_, _| {}).unwrap();
    assert_ne!(a.presented, c.presented);
}

#[test]
fn empty_task_list_gives_empty_matrix() {
    let data = common::synthetic(2, 1);
    let cfg = common::small_config();
    let tasks = TaskSequence::new(vec![]).unwrap();
    let r = run_continual(&data, &data, &tasks, &cfg, 1, |_, _| panic!("no tasks to report")).unwrap();
    assert!(r.matrix.is_empty());
    assert_eq!(r.train_samples, 0);
}

#[test]
fn rejects_wrong_image_size() {
    let small = memcl_core::IdxDataset::new(2, 2, vec![0.0; 8], vec![0, 1]).unwrap();
    let cfg = common::small_config();
    assert!(run_continual(&small, &small, &TaskSequence::default(), &cfg, 1, |_, _| {}).is_err());
}

#[test]
fn progress_reports_growing_rows() {
    let data = common::synthetic(4, 2);
    let cfg = common::small_config();
    let mut seen = Vec::new();
    run_continual(&data, &data, &TaskSequence::default(), &cfg, 1, |t, row| seen.push((t, row.len()))).unwrap();
    assert_eq!(seen, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
}
