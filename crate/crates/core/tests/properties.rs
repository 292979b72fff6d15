use clustered_consensus::analysis;
use clustered_consensus::certificate::{self, Certificate, Verdict};
use clustered_consensus::graph::{self, ClusterPartition, ClusteredNetwork, DirectedWeightedGraph};
use clustered_consensus::linalg::{self, Matrix};
use clustered_consensus::scenario::{self, Scenario, ScheduleSpec};
use clustered_consensus::sim::{self, DisturbanceSignal, ImpulseSchedule, Mode, SimOptions, Tag};
use proptest::prelude::*;

fn triples(n: usize, max_w: f64) -> impl Strategy<Value = Vec<(usize, usize, f64)>> {
    proptest::collection::vec((0..n, 0..n, 0.05..max_w), 0..(3 * n)).prop_map(|v| v.into_iter().filter(|(a, b, _)| a != b).collect())
}

fn laplacian_strategy(max_n: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_n).prop_flat_map(|n| triples(n, 2.0).prop_map(move |t| graph::laplacian(&DirectedWeightedGraph::from_triples(n, &t).unwrap())))
}

fn symmetric_strategy(max_n: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(-5.0..5.0f64, n * n).prop_map(move |v| Matrix::from_row_major(n, n, v).unwrap().symmetrized())
    })
}

/// Clusters as directed rings with extra edges; leaders average with the next
/// leader at impulses.
fn network_strategy() -> impl Strategy<Value = ClusteredNetwork> {
    proptest::collection::vec(1usize..5, 1..4).prop_flat_map(|sizes| {
        let n: usize = sizes.iter().sum();
        (Just(sizes), triples(n, 2.0), 0.1..0.9f64)
    })
    .prop_map(|(sizes, extra, mix)| {
        let mut clusters = Vec::new();
        let mut start = 0;
        for s in &sizes {
            clusters.push((start..start + s).collect::<Vec<_>>());
            start += s;
        }
        let n = start;
        let mut edges = Vec::new();
        for c in &clusters {
            for k in 0..c.len() {
                if c.len() > 1 {
                    edges.push((c[k], c[(k + 1) % c.len()], 1.0));
                }
            }
        }
        let cluster_of = |i: usize| clusters.iter().position(|c| c.contains(&i)).unwrap();
        edges.extend(extra.into_iter().filter(|(a, b, _)| cluster_of(*a) == cluster_of(*b)));
        let leaders: Vec<usize> = clusters.iter().map(|c| c[0]).collect();
        let m = leaders.len();
        let mut p_l = Matrix::identity(m);
        if m > 1 {
            for k in 0..m {
                p_l[(k, k)] = 1.0 - mix;
                p_l[(k, (k + 1) % m)] = mix;
            }
        }
        let partition = ClusterPartition::new(n, clusters, leaders).unwrap();
        let p_e = linalg::embed_leader_matrix(&p_l, &partition).unwrap();
        ClusteredNetwork::new(DirectedWeightedGraph::from_triples(n, &edges).unwrap(), partition, p_e).unwrap()
    })
}

fn state_for(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-5.0..5.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn heat_kernel_is_stochastic(l in laplacian_strategy(12), t in 0.01..5.0f64) {
        let e = linalg::mat_exp(&l.scale(-1.0), t).unwrap();
        for i in 0..l.rows() {
            prop_assert!((e.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(e.row(i).iter().all(|&v| v >= -1e-12));
            prop_assert!(e[(i, i)] > 0.0);
        }
    }

    #[test]
    fn heat_kernel_semigroup(l in laplacian_strategy(8), s in 0.0..2.0f64, t in 0.0..2.0f64) {
        let neg = l.scale(-1.0);
        let lhs = linalg::mat_exp(&neg, s + t).unwrap();
        let rhs = linalg::mat_exp(&neg, s).unwrap().matmul(&linalg::mat_exp(&neg, t).unwrap());
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn sym_eig_reconstructs(a in symmetric_strategy(9)) {
        let e = linalg::sym_eig(&a).unwrap();
        let v = &e.vectors;
        let recon = v.matmul(&Matrix::diagonal(&e.values)).matmul(&v.transpose());
        prop_assert!(recon.max_abs_diff(&a) < 1e-10 * a.norm_inf().max(1.0));
        prop_assert!(v.transpose().matmul(v).max_abs_diff(&Matrix::identity(a.rows())) < 1e-12);
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn strong_connectivity_implies_spanning_tree(n in 1usize..8, t in triples(8, 1.0)) {
        let t: Vec<_> = t.into_iter().filter(|(a, b, _)| *a < n && *b < n).collect();
        let g = DirectedWeightedGraph::from_triples(n, &t).unwrap();
        if graph::is_strongly_connected(&g) {
            prop_assert!(graph::has_directed_spanning_tree(&g));
        }
    }

    #[test]
    fn left_null_vector_annihilates_spanning_laplacian(l in laplacian_strategy(10)) {
        let g = graph::matrix_graph(&l.scale(-1.0).add(&Matrix::diagonal(&(0..l.rows()).map(|i| l[(i, i)]).collect::<Vec<_>>())), 0.0).unwrap();
        if graph::has_directed_spanning_tree(&g) {
            let r = linalg::left_null_vector(&l).unwrap();
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(linalg::norm2(&l.vecmat(&r)) < 1e-10);
            prop_assert!(r.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn embedding_restricts_to_leaders(net in network_strategy()) {
        let part = net.partition();
        let pe = net.p_e();
        for i in 0..part.node_count() {
            if !part.is_leader(i) {
                for j in 0..part.node_count() {
                    prop_assert_eq!(pe[(i, j)], if i == j { 1.0 } else { 0.0 });
                }
            } else {
                for j in 0..part.node_count() {
                    if pe[(i, j)] != 0.0 && i != j {
                        prop_assert!(part.is_leader(j));
                    }
                }
            }
        }
        prop_assert!(graph::validate_network(&net).passed);
    }

    #[test]
    fn jumps_apply_the_reset_matrix(net in network_strategy(), seed in 0u64..1000) {
        let n = net.node_count();
        let x0: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed) % 13) as f64 - 6.0).collect();
        let sched = ImpulseSchedule::random(0.2, 0.6, seed, 3.0).unwrap();
        let traj = sim::simulate(&net, &x0, &sched, &DisturbanceSignal::Zero, &SimOptions::new(3.0, Mode::Exact, 0.05)).unwrap();
        for (pre, post) in traj.jump_pairs() {
            let expected = net.p_e().matvec(&traj.samples[pre].state);
            prop_assert!(linalg::max_abs_diff(&expected, &traj.samples[post].state) < 1e-14);
            prop_assert_eq!(traj.samples[pre].time, traj.samples[post].time);
        }
    }

    #[test]
    fn exact_mode_restarts_consistently(net in network_strategy(), split in 1usize..5) {
        let n = net.node_count();
        let x0: Vec<f64> = (0..n).map(|i| i as f64 - 1.5).collect();
        let times: Vec<f64> = (1..=6).map(|k| 0.4 * k as f64).collect();
        let full = sim::simulate(&net, &x0, &ImpulseSchedule::explicit(times.clone()).unwrap(), &DisturbanceSignal::Zero, &SimOptions::new(2.6, Mode::Exact, 0.1)).unwrap();
        // restart from the post-jump state at the split impulse
        let t_split = times[split - 1];
        let (_, post) = full.jump_pairs()[split - 1];
        let rest: Vec<f64> = times[split..].iter().map(|t| t - t_split).collect();
        let second = sim::simulate(&net, &full.samples[post].state, &ImpulseSchedule::explicit(rest).unwrap(), &DisturbanceSignal::Zero, &SimOptions::new(2.6 - t_split, Mode::Exact, 0.1)).unwrap();
        prop_assert!(linalg::max_abs_diff(full.final_state(), second.final_state()) < 1e-12);
    }

    #[test]
    fn flow_conserves_cluster_weighted_averages(net in network_strategy()) {
        let n = net.node_count();
        let x0: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).sin()).collect();
        let traj = sim::simulate(&net, &x0, &ImpulseSchedule::uniform(0.7, 2.0).unwrap(), &DisturbanceSignal::Zero, &SimOptions::new(2.0, Mode::Rk4, 0.01)).unwrap();
        let part = net.partition();
        for c in 0..part.cluster_count() {
            let r = linalg::left_null_vector(&net.cluster_laplacian(c)).unwrap();
            let weighted = |x: &[f64]| part.members(c).iter().zip(&r).map(|(&i, w)| w * x[i]).sum::<f64>();
            for seg in traj.segments() {
                let first = weighted(&traj.samples[seg.start].state);
                for s in &traj.samples[seg.clone()] {
                    prop_assert!((weighted(&s.state) - first).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn hinf_index_is_additive(net in network_strategy(), k in 1usize..20) {
        let n = net.node_count();
        let w = DisturbanceSignal::Sinusoid { amplitude: 0.3, omega: 1.7, phase: 0.2, mask: None };
        let traj = sim::simulate(&net, &vec![0.0; n], &ImpulseSchedule::uniform(0.5, 2.0).unwrap(), &w, &SimOptions::new(2.0, Mode::Rk4, 0.05)).unwrap();
        let s = 0.1 * k as f64;
        let whole = analysis::hinf_index_window(&traj, &w, 1.0, 0.0, 2.0).unwrap().j;
        let a = analysis::hinf_index_window(&traj, &w, 1.0, 0.0, s).unwrap().j;
        let b = analysis::hinf_index_window(&traj, &w, 1.0, s, 2.0).unwrap().j;
        prop_assert!((whole - a - b).abs() < 1e-12);
    }

    #[test]
    fn jump_forms_agree_for_positive_definite_p(
        n in 1usize..6,
        raw in proptest::collection::vec(-1.0..1.0f64, 36),
        a in proptest::collection::vec(-1.0..1.0f64, 36),
        scale in 0.05..1.5f64,
        beta in 0.05..0.95f64,
    ) {
        let b = Matrix::from_row_major(n, n, raw[..n * n].to_vec()).unwrap();
        let p = b.matmul(&b.transpose()).add(&Matrix::identity(n).scale(0.5));
        let jump = Matrix::from_row_major(n, n, a[..n * n].to_vec()).unwrap().scale(scale);
        let part = ClusterPartition::new(n, (0..n).map(|i| vec![i]).collect(), (0..n).collect()).unwrap();
        let r = certificate::jump_lmi_forms(&p, &jump, beta, &part).unwrap();
        prop_assert_eq!(r.agreement, Some(true), "{:?} vs {:?}", r.quadratic.verdict, r.block.map(|b| b.verdict));
        // row-stochastic resets never contract the all-ones direction
        let rows: Vec<Vec<f64>> = a[..n * n].chunks(n).map(|r| {
            let r: Vec<f64> = r.iter().map(|v| v.abs() + 0.01).collect();
            let s: f64 = r.iter().sum();
            r.iter().map(|v| v / s).collect()
        }).collect();
        let r = certificate::jump_lmi_forms(&p, &Matrix::from_rows(&rows).unwrap(), beta, &part).unwrap();
        prop_assert_eq!(r.agreement, Some(true));
        prop_assert_eq!(r.quadratic.verdict, Verdict::Fail);
    }

    #[test]
    fn failing_verdicts_have_a_reason(a in symmetric_strategy(8)) {
        let n = a.rows();
        let part = ClusterPartition::new(n, vec![(0..n).collect()], vec![0]).unwrap();
        let r = certificate::assess(&a, &part).unwrap();
        if r.verdict == Verdict::Fail {
            prop_assert!(r.max_eigenvalue > r.epsilon || r.null_state_alignment > certificate::ALIGNMENT_TOL || r.near_zero_count > 1);
        }
        if r.verdict == Verdict::Strict {
            prop_assert!(r.eigenvalues.iter().all(|&v| v < 0.0));
        }
    }

    #[test]
    fn rate_is_monotone(alpha in 0.01..3.0f64, beta in 0.01..0.98f64, t in 0.05..3.0f64, d in 0.001..0.01f64) {
        let mk = |alpha: f64, beta: f64, t: f64| certificate::convergence_rate(&Certificate::new(Matrix::identity(1), alpha, 1.0, beta, 1, t).unwrap());
        let base = mk(alpha, beta, t);
        prop_assert!(mk(alpha + d, beta, t) > base);
        prop_assert!(mk(alpha, beta + d, t) < base);
        prop_assert!(mk(alpha, beta, t + d) < base);
    }

    #[test]
    fn stationary_distribution_is_invariant(n in 1usize..7, raw in proptest::collection::vec(0.01..1.0f64, 36)) {
        let mut rows: Vec<Vec<f64>> = raw[..n * n].chunks(n).map(|r| r.to_vec()).collect();
        for r in &mut rows {
            let s: f64 = r.iter().sum();
            r.iter_mut().for_each(|v| *v /= s);
        }
        let p = Matrix::from_rows(&rows).unwrap();
        let phi = linalg::stationary_distribution(&p).unwrap();
        prop_assert!(linalg::max_abs_diff(&p.vecmat(&phi), &phi) < 1e-12);
        prop_assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scenario_round_trips(
        x0 in state_for(7),
        delta in 0.05..2.0f64,
        horizon in 1.0..60.0f64,
        seed in any::<u64>(),
        random in any::<bool>(),
        with_cert in any::<bool>(),
    ) {
        let mut s = Scenario::from_json(scenario::bundled(if with_cert { "paper-fig2" } else { "paper-fig1" }).unwrap()).unwrap();
        s.x0 = x0;
        s.horizon = horizon;
        s.schedule = if random { ScheduleSpec::Random { delta_min: delta, delta_max: delta * 1.5, seed } } else { ScheduleSpec::Uniform { delta } };
        let text = s.to_json();
        let back = Scenario::from_json(&text).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.to_json(), text);
    }
}

#[test]
fn random_schedules_are_seed_deterministic() {
    let a = ImpulseSchedule::random(0.1, 0.9, 42, 20.0).unwrap();
    let b = ImpulseSchedule::random(0.1, 0.9, 42, 20.0).unwrap();
    let c = ImpulseSchedule::random(0.1, 0.9, 43, 20.0).unwrap();
    assert_eq!(a.times(), b.times());
    assert_ne!(a.times(), c.times());
    assert!(a.intervals().iter().all(|&d| (0.1..=0.9).contains(&d)));
}

#[test]
fn summary_value_matches_limit_product_for_same_schedule() {
    let s = Scenario::from_json(scenario::bundled("paper-fig1").unwrap()).unwrap();
    let out = scenario::evaluate(&s, false).unwrap();
    let net = s.build_network().unwrap();
    let sched = s.build_schedule().unwrap();
    let pred = analysis::limit_product(&net, &sched.intervals(), Some(&s.x0), analysis::DEFAULT_LIMIT_TOL).unwrap();
    assert!((out.summary.consensus_value.unwrap() - pred.value.unwrap()).abs() < 1e-9);
    assert!(out.trajectory.samples.iter().any(|x| x.tag == Tag::PostJump));
}

#[test]
fn sweep_rows_follow_input_order() {
    let s = Scenario::from_json(scenario::bundled("paper-fig1").unwrap()).unwrap();
    let rows = scenario::sweep(&s, &[1.0, 0.1, 0.5], false).unwrap();
    assert_eq!(rows.iter().map(|r| r.delta).collect::<Vec<_>>(), vec![1.0, 0.1, 0.5]);
    assert!(rows.iter().all(|r| r.residual.unwrap() < 1e-8));
}
