// smoke: dynamic pruning at n=512
use dynmsf_core::graph::{Frac, Graph};
use dynmsf_core::pruning::{DynamicPruner, PruneError};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_3_regular(n: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'outer: loop {
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| [v, v, v]).collect();
        stubs.shuffle(&mut rng);
        let mut list = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for c in stubs.chunks(2) {
            let (u, v) = (c[0], c[1]);
            if u == v || seen.contains(&(u.min(v), u.max(v))) { continue 'outer; }
            seen.insert((u.min(v), u.max(v)));
            list.push((u, v, list.len() as i64));
        }
        return Graph::from_weighted_edges(n, &list).unwrap();
    }
}

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(512);
    let g = random_3_regular(n, 1);
    let mut pruner = DynamicPruner::new(g.clone(), Frac::new(1, 10)).unwrap();
    let mut live = g;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t0 = std::time::Instant::now();
    let mut steps = 0;
    let tcap: usize = std::env::args().nth(2).and_then(|a| a.parse().ok()).unwrap_or(60);
    for step in 0..tcap {
        let alive: Vec<usize> = live.alive_edge_ids().collect();
        let mut choice = None;
        for _ in 0..80 {
            let e = alive[rng.gen_range(0..alive.len())];
            let mut trial = live.clone();
            trial.delete_edge(e).unwrap();
            let rest: Vec<usize> = (0..trial.n()).filter(|&v| !pruner.is_pruned(v)).collect();
            if rest.is_empty() { break; }
            let comp = trial.component_of(rest[0]);
            let cset: std::collections::HashSet<_> = comp.into_iter().collect();
            if rest.iter().all(|v| cset.contains(v)) { choice = Some(e); break; }
        }
        let Some(e) = choice else { break };
        live.delete_edge(e).unwrap();
        match pruner.delete(e) {
            Ok(_) => {}
            Err(PruneError::Halted) => { println!("HALT at step {step}"); break; }
            Err(other) => { println!("ERR {other}"); break; }
        }
        steps += 1;
        let rest: Vec<usize> = (0..live.n()).filter(|&v| !pruner.is_pruned(v)).collect();
        if !rest.is_empty() {
            let comp = live.component_of(rest[0]);
            let cset: std::collections::HashSet<_> = comp.into_iter().collect();
            assert!(rest.iter().all(|v| cset.contains(v)), "predicate broken at {step}");
        }
    }
    println!("steps={steps} P={} work_total={} work_max={} elapsed={:?}",
        pruner.pruning_set().len(), pruner.stats.work_total, pruner.stats.work_max, t0.elapsed());
}
