//! Property tests for the language-level invariants: mask lane coverage,
//! printer/parser round trips on generated programs, bounds safety under
//! fuzzed indices, and characterization identities.

use ember::mem::{Buffer, MemImage};
use ember::scf::{interpret_scf, parse_scf, print_scf, verify_scf, InterpError};
use ember::types::ElemType;
use ember::workloads::{lru_hit_rate, reuse_distance_cdf};
use proptest::prelude::*;

/// Lane coverage of a masked vector loop: every scalar iteration appears in
/// exactly one live lane of one vector iteration.
fn masked_lanes(lo: u64, hi: u64, step: u64, vlen: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut base = lo;
    while base < hi {
        for j in 0..vlen {
            let iv = base + j * step;
            if iv < hi {
                out.push(iv);
            }
        }
        base += step * vlen;
    }
    out
}

proptest! {
    #[test]
    fn mask_soundness(lo in 0u64..50, span in 0u64..70, step in 1u64..4, lg_vlen in 0u32..4) {
        let hi = lo + span;
        let vlen = 1u64 << lg_vlen;
        let scalar: Vec<u64> = {
            let mut v = Vec::new();
            let mut iv = lo;
            while iv < hi {
                v.push(iv);
                iv += step;
            }
            v
        };
        let vectored = masked_lanes(lo, hi, step, vlen);
        prop_assert_eq!(scalar, vectored);
    }

    #[test]
    fn cdf_is_monotone_and_rename_invariant(trace in proptest::collection::vec(0u64..12, 1..80)) {
        let rep = reuse_distance_cdf(&trace);
        // Monotone, bounded in [0,1], final value 1 when any re-access exists.
        let mut prev = 0.0;
        for x in 0..12 {
            let c = rep.cdf(x);
            prop_assert!(c >= prev && (0.0..=1.0).contains(&c));
            prev = c;
        }
        if !rep.distances.is_empty() {
            prop_assert_eq!(rep.cdf(u64::MAX - 1), 1.0);
        }
        // Renaming vector ids leaves distances unchanged.
        let renamed: Vec<u64> = trace.iter().map(|v| v * 13 + 5).collect();
        prop_assert_eq!(reuse_distance_cdf(&renamed).distances, rep.distances);
    }

    #[test]
    fn lru_hit_rate_monotone_in_capacity(trace in proptest::collection::vec(0u64..16, 1..120)) {
        let mut prev = 0.0;
        for cap in 1..=18u64 {
            let r = lru_hit_rate(&trace, cap);
            prop_assert!(r + 1e-12 >= prev);
            prev = r;
        }
    }

    #[test]
    fn fuzzed_out_of_range_indices_always_raise_bounds_errors(
        idxs in proptest::collection::vec(0u64..64, 1..12),
        rows in 2u64..8,
    ) {
        // Bind a table smaller than some indices: interpretation either
        // succeeds (all in range) or reports the out-of-bounds access on the
        // value table; it never panics or fabricates values.
        let f = parse_scf(ember::workloads::SLS_SRC).unwrap();
        let n = idxs.len() as u64;
        let any_oob = idxs.iter().any(|i| *i >= rows);
        let inputs = MemImage::new()
            .with_buffer("ptrs", Buffer::from_index(vec![2], vec![0, n]))
            .with_buffer("idxs", Buffer::from_index(vec![n], idxs))
            .with_buffer("vals", Buffer::zeros(ElemType::F32, vec![rows, 2]))
            .with_buffer("out", Buffer::zeros(ElemType::F32, vec![1, 2]))
            .with_scalar("n_batches", 1)
            .with_scalar("emb_len", 2);
        match interpret_scf(&f, &inputs) {
            Ok(_) => prop_assert!(!any_oob),
            Err(InterpError::Oob { mem, .. }) => {
                prop_assert!(any_oob);
                prop_assert_eq!(mem, "vals");
            }
            Err(other) => prop_assert!(false, "unexpected error {}", other),
        }
    }
}

// ---------------------------------------------------------------------------
// Generated-program round trips
// ---------------------------------------------------------------------------

/// A tiny generator of valid structured programs: a scalar `n`, two 1-D
/// buffers, and a random nest of loops/assigns/stores over in-scope names.
fn arb_function() -> impl Strategy<Value = String> {
    let expr = |vars: Vec<String>| -> BoxedStrategy<String> {
        let leaf = prop_oneof![
            (0u64..9).prop_map(|v| format!("{v}.5")),
            proptest::sample::select(vars.clone()).prop_map(|v| format!("a[{v} % 8]")),
            proptest::sample::select(vars).prop_map(|v| format!("b[{v} % 8]")),
        ];
        leaf.prop_recursive(2, 8, 2, |inner| {
            (inner.clone(), proptest::sample::select(vec!["+", "-", "*"]), inner)
                .prop_map(|(l, op, r)| format!("({l} {op} {r})"))
        })
        .boxed()
    };
    fn stmts(depth: u32, vars: Vec<String>, expr: &dyn Fn(Vec<String>) -> BoxedStrategy<String>) -> BoxedStrategy<String> {
        let store = (expr(vars.clone()), proptest::sample::select(vars.clone()))
            .prop_map(|(e, v)| format!("b[{v} % 8] = {e};"));
        if depth == 0 {
            return store.boxed();
        }
        let nested = {
            let vars2 = vars.clone();
            let fresh = format!("i{depth}");
            let mut inner_vars = vars2.clone();
            inner_vars.push(fresh.clone());
            (stmts(depth - 1, inner_vars, expr), proptest::sample::select(vec![1u64, 2]))
                .prop_map(move |(body, step)| {
                    format!("for(idx {fresh} = 0; {fresh} < n; {fresh} += {step}) {{ {body} }}")
                })
        };
        prop_oneof![store, nested].boxed()
    }
    fn expr_fn(vars: Vec<String>) -> BoxedStrategy<String> {
        let leaf = prop_oneof![
            (0u64..9).prop_map(|v| format!("{v}.5")),
            proptest::sample::select(vars.clone()).prop_map(|v| format!("a[{v} % 8]")),
            proptest::sample::select(vars).prop_map(|v| format!("b[{v} % 8]")),
        ];
        leaf.prop_recursive(2, 8, 2, |inner| {
            (inner.clone(), proptest::sample::select(vec!["+", "-", "*"]), inner)
                .prop_map(|(l, op, r)| format!("({l} {op} {r})"))
        })
        .boxed()
    }
    let _ = expr;
    stmts(2, vec!["c0".to_string()], &expr_fn).prop_map(|body| {
        format!(
            "void g(a: mref<8 x f32>, b: mref<8 x f32>, n: idx) {{\n  idx c0 = 3;\n  {body}\n}}"
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn generated_programs_round_trip_and_interpret(src in arb_function()) {
        let f = match parse_scf(&src) {
            Ok(f) => f,
            Err(e) => return Err(TestCaseError::fail(format!("{e}\n{src}"))),
        };
        verify_scf(&f).map_err(|e| TestCaseError::fail(format!("{e}\n{src}")))?;
        // Round trip through the printer.
        let printed = print_scf(&f);
        let f2 = parse_scf(&printed)
            .map_err(|e| TestCaseError::fail(format!("{e}\n{printed}")))?;
        prop_assert_eq!(print_scf(&f2), printed);
        // Interpretation terminates and is deterministic.
        let inputs = MemImage::new()
            .with_buffer("a", Buffer::from_f32(vec![8], (0..8).map(|i| i as f32).collect()))
            .with_buffer("b", Buffer::zeros(ElemType::F32, vec![8]))
            .with_scalar("n", 5);
        let r1 = interpret_scf(&f, &inputs).unwrap();
        let r2 = interpret_scf(&f2, &inputs).unwrap();
        prop_assert!(r1.bit_eq(&r2));
    }
}
