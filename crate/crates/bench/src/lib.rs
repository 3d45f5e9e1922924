//! Deterministic networks used by the benchmarks.

use crn_core::{parse_network, ReactionNetwork};

/// Ring of `n` species with forward rate 1 and backward rate 2, all
/// species diffusive, bump initial data on the first species.
pub fn ring(n: usize, grid: usize) -> ReactionNetwork {
    let mut text = String::from("species");
    for i in 0..n {
        text.push_str(&format!(" S{i}"));
    }
    text.push('\n');
    for i in 0..n {
        let j = (i + 1) % n;
        text.push_str(&format!("diff S{i} 1\nrxn S{i} -> S{j} 1\nrxn S{j} -> S{i} 2\n"));
    }
    text.push_str(&format!("init S0 bump 1 0.5 1\ngrid {grid}\n"));
    parse_network(&text).expect("generated ring is valid")
}

/// Chain of `n` singleton components feeding each other in one direction.
pub fn chain(n: usize) -> ReactionNetwork {
    let mut text = String::from("species");
    for i in 0..n {
        text.push_str(&format!(" S{i}"));
    }
    text.push('\n');
    for i in 0..n.saturating_sub(1) {
        text.push_str(&format!("rxn S{i} -> S{} 1\n", i + 1));
    }
    text.push_str("init S0 const 1\n");
    parse_network(&text).expect("generated chain is valid")
}
