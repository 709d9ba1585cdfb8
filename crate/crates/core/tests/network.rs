use std::collections::{HashMap, VecDeque};

use manetsim_core::mac::StatKind;
use manetsim_core::packet::PacketKind;
use manetsim_core::phy::{in_range, RadioParams};
use manetsim_core::scenario::net::Router;
use manetsim_core::scenario::{
    matrix_topology, run_scenario, run_scenario_with, Mobility, Network, Protocol, RunOptions, ScenarioConfig,
};
use manetsim_core::video::synth::synth_sequence;
use manetsim_core::video::trace_from_frames;
use manetsim_core::SimTime;

fn cfg(protocol: Protocol, n: usize, d: f64, frames: usize) -> ScenarioConfig {
    ScenarioConfig { protocol, n_nodes: n, spacing: d, n_frames: frames, ..Default::default() }
}

#[test]
fn mac_and_segment_conservation() {
    let src = synth_sequence(300, 176, 144).unwrap();
    for (p, n, d) in [(Protocol::Aodv, 25, 100.0), (Protocol::Aodv, 16, 150.0), (Protocol::Dsdv, 16, 50.0)] {
        let r = run_scenario(&cfg(p, n, d, 300), &src).unwrap();
        let ch = &r.net.channel;
        for kind in [PacketKind::Data, PacketKind::Rrep] {
            let k = ch.get(StatKind::Packet(kind));
            assert_eq!(k.sent, k.delivered + k.collided + k.unreached, "{p} {n} {d} {kind}");
        }
        let data = ch.get(StatKind::Packet(PacketKind::Data));
        assert_eq!(
            data.offered,
            data.completed + data.dropped_queue + data.dropped_retry + data.stranded + r.net.data_in_mac,
            "{p} {n} {d}"
        );

        let sent: HashMap<(u32, u32), SimTime> =
            r.net.sender_log.records().iter().map(|x| ((x.frame_id, x.segment_index), x.time)).collect();
        assert_eq!(sent.len(), r.trace.entries.iter().map(|e| e.n_segments as usize).sum::<usize>());
        assert!(r.net.receiver_log.len() <= r.net.sender_log.len());
        for rec in r.net.receiver_log.records() {
            let t = sent.get(&(rec.frame_id, rec.segment_index)).expect("received segment was sent");
            assert!(rec.time > *t);
        }
        assert_eq!(r.net.seq_regressions, 0);
    }
}

#[test]
fn identical_seed_gives_identical_run() {
    let src = synth_sequence(150, 176, 144).unwrap();
    let opts = RunOptions { event_log: true, ..Default::default() };
    for p in [Protocol::Aodv, Protocol::Dsdv] {
        let c = cfg(p, 16, 100.0, 150);
        let a = run_scenario_with(&c, &src, &opts).unwrap();
        let b = run_scenario_with(&c, &src, &opts).unwrap();
        assert_eq!(a.net.event_log, b.net.event_log);
        assert!(a.net.event_log.as_ref().is_some_and(|l| !l.is_empty()));
        assert_eq!(a.net.receiver_log.to_text(), b.net.receiver_log.to_text());
        assert_eq!(a.metrics.to_csv(), b.metrics.to_csv());
        assert_eq!(a.summary(), b.summary());

        let other = run_scenario_with(&ScenarioConfig { seed: 99, ..c }, &src, &opts).unwrap();
        assert_ne!(a.net.event_log, other.net.event_log);
    }
}

fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<Option<u32>> {
    let mut dist = vec![None; adj.len()];
    dist[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

#[test]
fn dsdv_tables_converge_to_bfs_in_simulation() {
    let src = synth_sequence(1, 176, 144).unwrap();
    let radio = RadioParams::default();
    for (n, d) in [(4, 100.0), (9, 150.0), (9, 300.0)] {
        let c = cfg(Protocol::Dsdv, n, d, 1);
        let trace = trace_from_frames(&src.frames, &c.trace_params()).unwrap();
        let mut net = Network::new(&c, &trace, false);
        net.start();
        net.run_until(SimTime::from_secs(150));
        let pos = matrix_topology(n, d);
        let adj: Vec<Vec<usize>> =
            (0..n).map(|a| (0..n).filter(|&b| b != a && in_range(pos[a], pos[b], &radio)).collect()).collect();
        for node in net.nodes() {
            let Router::Dsdv(r) = &node.router else { panic!("dsdv run") };
            let want = bfs(&adj, node.id);
            for (dst, w) in want.iter().enumerate() {
                assert_eq!(r.route_lookup(dst).map(|h| h.hop_count), *w, "n={n} d={d} {}->{dst}", node.id);
            }
        }
    }
}

#[test]
fn mobile_run_completes() {
    let src = synth_sequence(120, 176, 144).unwrap();
    let c = ScenarioConfig { mobility: Mobility::OUTWARD, ..cfg(Protocol::Aodv, 9, 20.0, 120) };
    let r = run_scenario(&c, &src).unwrap();
    assert_eq!(r.metrics.psnr_db.len(), 120);
    assert!(r.recon.decodable_count() > 0);
}
