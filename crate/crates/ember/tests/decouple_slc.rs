//! Decoupling and SLC-level differential tests across the five kernels.

use ember::decouple::{classify_loops, compute_per_lookup, decouple, LoopClass};
use ember::scf::{interpret_scf, parse_scf};
use ember::slc::{interpret_slc, parse_slc, print_slc, verify_slc, SlcItem};
use ember::workloads::{build_kernel, gen_inputs, kernel_outputs, KernelDims, KernelKind, Locality};

fn outputs_match(a: &ember::mem::MemImage, b: &ember::mem::MemImage, outs: &[&str]) -> bool {
    outs.iter().all(|o| {
        a.buffer(o)
            .zip(b.buffer(o))
            .map(|(x, y)| x.bit_eq(y))
            .unwrap_or(false)
    })
}

#[test]
fn sls_decouples_to_expected_structure() {
    let f = parse_scf(ember::workloads::SLS_SRC).unwrap();
    let (slc, class) = decouple(&f).unwrap();
    verify_slc(&slc).unwrap();

    // All three loops are offloading candidates.
    for path in ["b", "b/p", "b/p/e"] {
        assert_eq!(class.class_of(path), Some(&LoopClass::Candidate), "{path}");
    }

    // Three nested loops; streams s_beg/s_end at the batch level, s_i at the
    // segment level, s_val innermost.
    let chain = slc.loop_chain();
    assert_eq!(chain.len(), 3);
    let names = |l: &ember::slc::SlcLoop| {
        l.decls().map(|d| d.name.clone()).collect::<Vec<_>>()
    };
    assert_eq!(names(chain[0]), vec!["s_beg", "s_end"]);
    assert_eq!(names(chain[1]), vec!["s_i"]);
    assert_eq!(names(chain[2]), vec!["s_val"]);
    // Total stream declarations: exactly four.
    assert_eq!(
        chain.iter().map(|l| l.decls().count()).sum::<usize>(),
        4
    );

    // One iteration callback with three conversions in first-use order.
    let cb = chain[2].end_call().expect("leaf callback");
    let toval_vars: Vec<&str> = cb.tovals.iter().map(|t| t.var.as_str()).collect();
    assert_eq!(toval_vars, vec!["b", "e", "val"]);
    assert!(chain[0].begin_call().is_none());
    assert!(chain[0].end_call().is_none());
}

#[test]
fn mp_trailing_loop_is_workspace() {
    let f = parse_scf(ember::workloads::MP_SRC).unwrap();
    let class = classify_loops(&f).unwrap();
    assert_eq!(class.class_of("v"), Some(&LoopClass::Candidate));
    assert_eq!(class.class_of("v/e0"), Some(&LoopClass::Workspace));
    assert_eq!(class.class_of("v/p"), Some(&LoopClass::Candidate));
    assert_eq!(class.class_of("v/p/e"), Some(&LoopClass::Candidate));
    assert_eq!(class.class_of("v/e1"), Some(&LoopClass::Workspace));

    // The workspace loops land in begin/end callbacks of the vertex loop.
    let (slc, _) = decouple(&f).unwrap();
    let root = slc.root_loop().unwrap();
    assert!(root.begin_call().is_some(), "zeroing loop becomes a begin callback");
    assert!(root.end_call().is_some(), "rescale loop becomes an end callback");
    verify_slc(&slc).unwrap();
}

#[test]
fn kg_two_level_nest_without_segment_pointers() {
    let f = parse_scf(ember::workloads::KG_SRC).unwrap();
    let (slc, class) = decouple(&f).unwrap();
    assert_eq!(class.class_of("s"), Some(&LoopClass::Candidate));
    assert_eq!(class.class_of("s/e"), Some(&LoopClass::Candidate));
    let chain = slc.loop_chain();
    assert_eq!(chain.len(), 2);
    // Three index loads at the sample level, three value loads innermost.
    assert_eq!(chain[0].decls().count(), 3);
    assert_eq!(chain[1].decls().count(), 3);
}

#[test]
fn spattn_all_candidates_pure_gather() {
    let f = parse_scf(ember::workloads::SPATTN_SRC).unwrap();
    let (slc, class) = decouple(&f).unwrap();
    for path in ["qb", "qb/j", "qb/j/kt", "qb/j/kt/qt", "qb/j/kt/qt/e"] {
        assert_eq!(class.class_of(path), Some(&LoopClass::Candidate), "{path}");
    }
    verify_slc(&slc).unwrap();
    assert_eq!(slc.loop_chain().len(), 5);
}

#[test]
fn compute_per_lookup_ratios_match() {
    let cases = [
        (KernelKind::Sls, (1, 1)),
        (KernelKind::Spattn, (0, 1)),
        (KernelKind::Spmm, (2, 1)),
        (KernelKind::Mp, (5, 2)),
        (KernelKind::Kg, (4, 3)),
    ];
    for (kind, want) in cases {
        let f = parse_scf(ember::workloads::kernel_src(kind)).unwrap();
        let got = compute_per_lookup(&f).unwrap();
        assert_eq!(got, want, "{}", kind.name());
    }
}

#[test]
fn rejected_bound_from_callback_value() {
    // The inner loop's bound comes from a loaded value of a *written* memref,
    // which no candidate can produce.
    let src = r#"
void f(a: mref<? x idx>, t: mref<? x idx>, vals: mref<? x f32>, out: mref<? x f32>, n: idx) {
  for(idx i = 0; i < n; i++) {
    idx v = a[i];
    t[i] = v + 1;
    idx lim = t[i];
    for(idx j = 0; j < lim; j++) {
      f32 x = vals[j];
      out[j] = x;
    }
  }
}
"#;
    let f = parse_scf(src).unwrap();
    let class = classify_loops(&f).unwrap();
    assert!(matches!(class.class_of("i/j"), Some(LoopClass::Rejected(_))));
}

#[test]
fn two_sibling_candidates_rejected() {
    let src = r#"
void f(a: mref<? x f32>, b: mref<? x f32>, o1: mref<? x f32>, o2: mref<? x f32>, n: idx) {
  for(idx i = 0; i < n; i++) {
    f32 x = a[i];
    o1[i] = x;
  }
  for(idx j = 0; j < n; j++) {
    f32 y = b[j];
    o2[j] = y;
  }
}
"#;
    let f = parse_scf(src).unwrap();
    let err = classify_loops(&f).unwrap_err();
    assert!(err.to_string().contains("two offloading candidates"));
}

#[test]
fn pure_compute_function_becomes_single_callback() {
    let src = "void f(o: mref<4 x f32>){ o[0] = o[0] + 1.0; }";
    let f = parse_scf(src).unwrap();
    let (slc, _) = decouple(&f).unwrap();
    assert!(slc.root_loop().is_none());
    assert_eq!(slc.callback_count(), 1);
    assert!(matches!(slc.items.as_slice(), [SlcItem::Call(_)]));
    verify_slc(&slc).unwrap();
}

#[test]
fn decoupled_kernels_interpret_identically() {
    for kind in KernelKind::ALL {
        let dims = KernelDims::default();
        let f = build_kernel(kind, &dims).unwrap();
        let (slc, _) = decouple(&f).unwrap();
        verify_slc(&slc).unwrap();
        for seed in 0..4 {
            let inputs = gen_inputs(kind, &dims, Locality::Uniform, seed, false);
            let want = interpret_scf(&f, &inputs).unwrap();
            let got = interpret_slc(&slc, &inputs).unwrap();
            assert!(
                outputs_match(&want, &got, kernel_outputs(kind)),
                "{} seed {seed}",
                kind.name()
            );
        }
    }
}

#[test]
fn slc_print_parse_round_trip() {
    for kind in KernelKind::ALL {
        let f = build_kernel(kind, &KernelDims::default()).unwrap();
        let (slc, _) = decouple(&f).unwrap();
        let printed = print_slc(&slc);
        let reparsed = parse_slc(&printed)
            .unwrap_or_else(|e| panic!("{}: {e}\n{printed}", kind.name()));
        assert_eq!(slc, reparsed, "{}", kind.name());
        // Fixpoint.
        assert_eq!(print_slc(&reparsed), printed);
    }
}

#[test]
fn marking_memref_written_shrinks_candidates() {
    // Metamorphic check: appending a store into `vals` can only shrink the
    // candidate set.
    let base = parse_scf(ember::workloads::SLS_SRC).unwrap();
    let before = classify_loops(&base).unwrap();
    let n_before = before
        .loops
        .iter()
        .filter(|(_, c)| matches!(c, LoopClass::Candidate))
        .count();
    let src = ember::workloads::SLS_SRC.replace(
        "out[b, e] = acc + val;",
        "out[b, e] = acc + val;\n        vals[i, e] = val;",
    );
    let f = parse_scf(&src).unwrap();
    let after = classify_loops(&f).unwrap();
    let n_after = after
        .loops
        .iter()
        .filter(|(_, c)| matches!(c, LoopClass::Candidate))
        .count();
    assert!(n_after < n_before, "{n_after} vs {n_before}");
    for (path, class) in &after.loops {
        if matches!(class, LoopClass::Candidate) {
            assert_eq!(before.class_of(path), Some(&LoopClass::Candidate));
        }
    }
}

#[test]
fn no_load_streams_inside_workspace_loops() {
    // Workspace loops stay callback-resident in full: the MP trailing loop
    // must not surface any stream declarations.
    let f = parse_scf(ember::workloads::MP_SRC).unwrap();
    let (slc, _) = decouple(&f).unwrap();
    let root = slc.root_loop().unwrap();
    let end = root.end_call().unwrap();
    // The end callback holds the trailing loop; its loads are plain memory
    // reads of tmp/vtx/out, never conversions from streams at that level.
    assert!(end.tovals.iter().all(|t| t.var == "v"));
}
