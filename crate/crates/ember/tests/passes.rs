//! Pass-level semantics preservation, idempotence, and structural checks.

use ember::decouple::lower_scf_to_slc;
use ember::passes::{
    align_queues, bufferize, convert_store_streams, run_passes, vectorize, PassConfig,
};
use ember::scf::{interpret_scf, parse_scf};
use ember::slc::{
    interpret_slc, interpret_slc_with_stats, print_slc, verify_slc, SlcItem, ToValKind,
};
use ember::workloads::{
    build_kernel, gen_inputs, kernel_outputs, KernelDims, KernelKind, Locality,
};

fn outputs_match(a: &ember::mem::MemImage, b: &ember::mem::MemImage, outs: &[&str]) -> bool {
    outs.iter().all(|o| {
        a.buffer(o)
            .zip(b.buffer(o))
            .map(|(x, y)| x.bit_eq(y))
            .unwrap_or(false)
    })
}

fn opt_config(opt: u8, vlen: u32) -> PassConfig {
    PassConfig {
        opt,
        vlen,
        ..Default::default()
    }
}

#[test]
fn every_pass_preserves_semantics_on_all_kernels() {
    for kind in KernelKind::ALL {
        let dims = KernelDims {
            emb_len: 10, // exercises remainder masks for every vlen > 1
            ..KernelDims::default()
        };
        let f = build_kernel(kind, &dims).unwrap();
        let slc0 = lower_scf_to_slc(&f).unwrap();
        for vlen in [1u32, 2, 4, 8] {
            for opt in 0..=3u8 {
                let (opted, _notes) = run_passes(&slc0, &opt_config(opt, vlen));
                verify_slc(&opted).unwrap_or_else(|e| {
                    panic!("{} opt{} v{}: {e}\n{}", kind.name(), opt, vlen, print_slc(&opted))
                });
                for seed in 0..2 {
                    let inputs = gen_inputs(kind, &dims, Locality::Uniform, seed, false);
                    let want = interpret_scf(&f, &inputs).unwrap();
                    let got = interpret_slc(&opted, &inputs).unwrap_or_else(|e| {
                        panic!("{} opt{} v{}: {e}", kind.name(), opt, vlen)
                    });
                    assert!(
                        outputs_match(&want, &got, kernel_outputs(kind)),
                        "{} opt{opt} v{vlen} seed {seed}\n{}",
                        kind.name(),
                        print_slc(&opted)
                    );
                }
            }
        }
    }
}

#[test]
fn passes_are_idempotent() {
    for kind in KernelKind::ALL {
        let f = build_kernel(kind, &KernelDims::default()).unwrap();
        let slc0 = lower_scf_to_slc(&f).unwrap();
        let (v1, _) = vectorize(&slc0, 4);
        let (v2, note) = vectorize(&v1, 4);
        assert_eq!(v1, v2, "{}", kind.name());
        if v1 != slc0 {
            assert!(note.is_some());
        }
        let (b1, _) = bufferize(&v1);
        let (b2, _) = bufferize(&b1);
        assert_eq!(b1, b2, "{}", kind.name());
        let (a1, _) = align_queues(&b1);
        let (a2, _) = align_queues(&a1);
        assert_eq!(a1, a2, "{}", kind.name());
    }
}

#[test]
fn sls_vectorized_structure_matches_listing() {
    // Masked vector load of vals, vload/vstore of out, lane-0 extract of the
    // element position.
    let f = parse_scf(ember::workloads::SLS_SRC).unwrap();
    let slc = lower_scf_to_slc(&f).unwrap();
    let (v, note) = vectorize(&slc, 8);
    assert!(note.is_none(), "{note:?}");
    verify_slc(&v).unwrap();
    let printed = print_slc(&v);
    assert!(printed.contains("slcv.for<8>((str s_e, str msk) from 0 to emb_len step 1)"));
    assert!(printed.contains("str s_val = slcv.mem_str<8>(vals[s_i, s_e], msk);"));
    assert!(printed.contains("index e = slcv.to_val(s_e)[0];"));
    assert!(printed.contains("vec<8 x f32> val = slcv.to_val<8>(s_val);"));
    assert!(printed.contains("vec<8 x f32> acc = vload<8>(out[b, e], m);"));
    assert!(printed.contains("vstore<8>(acc + val, out[b, e], m);"));
}

#[test]
fn vectorize_mask_counts() {
    // emb_len=5, vlen=4: two vector iterations per lookup, masks
    // [1,1,1,1] then [1,0,0,0].
    let dims = KernelDims {
        batches: 1,
        lookups: 1,
        rows: 2,
        emb_len: 5,
        uniform_segments: true,
        ..Default::default()
    };
    let f = build_kernel(KernelKind::Sls, &dims).unwrap();
    let slc = lower_scf_to_slc(&f).unwrap();
    let (v, _) = vectorize(&slc, 4);
    let inputs = gen_inputs(KernelKind::Sls, &dims, Locality::Uniform, 0, true);
    let (_, stats) = interpret_slc_with_stats(&v, &inputs).unwrap();
    // ceil(5/4) = 2 callback invocations per lookup, 1 lookup total.
    assert_eq!(stats.callback_invocations, 2);
    let want = interpret_scf(&f, &inputs).unwrap();
    let got = interpret_slc(&v, &inputs).unwrap();
    assert!(outputs_match(&want, &got, &["out"]));
}

#[test]
fn bufferize_structure_and_trigger_counts() {
    let f = parse_scf(ember::workloads::SLS_SRC).unwrap();
    let slc = lower_scf_to_slc(&f).unwrap();
    let (v, _) = vectorize(&slc, 2);
    let (b, note) = bufferize(&v);
    assert!(note.is_none(), "{note:?}");
    verify_slc(&b).unwrap();
    let printed = print_slc(&b);
    assert!(printed.contains("str<vec<2 x f32>> buf_s_val = slcv.buf_str();"));
    assert!(printed.contains("slc.push(buf_s_val, s_val);"));
    assert!(printed.contains("chunks<2 x f32> bv_val = slc.to_val(buf_s_val);"));
    // The inner loop lost its callback; the parent gained the drain.
    let chain = b.loop_chain();
    assert!(chain[2].end_call().is_none());
    assert!(chain[1].end_call().is_some());

    // A segment of 3 embeddings triggers the drained callback 3 times.
    let dims = KernelDims {
        batches: 1,
        lookups: 3,
        rows: 4,
        emb_len: 4,
        uniform_segments: true,
        ..Default::default()
    };
    let inputs = gen_inputs(KernelKind::Sls, &dims, Locality::Uniform, 1, true);
    let (_, stats) = interpret_slc_with_stats(&b, &inputs).unwrap();
    assert_eq!(stats.callback_invocations, 3);

    // emb_len == vlen: the drain loop runs exactly once per vector.
    let (v1, _) = vectorize(&slc, 4);
    let (b1, _) = bufferize(&v1);
    let dims1 = KernelDims {
        batches: 1,
        lookups: 1,
        rows: 2,
        emb_len: 4,
        uniform_segments: true,
        ..Default::default()
    };
    let inputs1 = gen_inputs(KernelKind::Sls, &dims1, Locality::Uniform, 2, true);
    let (_, stats1) = interpret_slc_with_stats(&b1, &inputs1).unwrap();
    assert_eq!(stats1.callback_invocations, 1);
}

#[test]
fn align_elides_batch_index_and_adds_increment() {
    let f = parse_scf(ember::workloads::SLS_SRC).unwrap();
    let slc = lower_scf_to_slc(&f).unwrap();
    let (v, _) = vectorize(&slc, 4);
    let (b, _) = bufferize(&v);
    let (a, note) = align_queues(&b);
    assert!(note.is_none(), "{note:?}");
    verify_slc(&a).unwrap_or_else(|e| panic!("{e}\n{}", print_slc(&a)));
    let printed = print_slc(&a);
    // Carried variable on the batch loop, incremented after the segment loop.
    assert!(printed.contains("slc.for(str s_b from 0 to n_batches step 1) (index b = 0)"));
    assert!(printed.contains("b += 1;"));
    // The drained callback no longer converts s_b.
    let chain = a.loop_chain();
    let drain = chain[1].end_call().unwrap();
    assert!(drain.tovals.iter().all(|t| t.stream != "s_b"));
    // The increment callback is the end callback of the batch loop body.
    let root_end = chain[0].end_call().unwrap();
    assert!(root_end
        .stmts
        .iter()
        .any(|s| matches!(s, ember::cpu::CpuStmt::Bump { var, delta: 1 } if var == "b")));
}

#[test]
fn align_pads_non_elidable_scalars() {
    // The MP rescale value comes from a load stream and cannot be elided.
    let f = parse_scf(ember::workloads::MP_SRC).unwrap();
    let slc = lower_scf_to_slc(&f).unwrap();
    let (v, _) = vectorize(&slc, 4);
    let (b, note) = bufferize(&v);
    assert!(note.is_none(), "{note:?}");
    let (a, _) = align_queues(&b);
    verify_slc(&a).unwrap_or_else(|e| panic!("{e}\n{}", print_slc(&a)));
    let mut found_padded = false;
    let chain = a.loop_chain();
    for l in &chain {
        for item in &l.items {
            if let SlcItem::Call(cb) = item {
                for tv in &cb.tovals {
                    if tv.kind == ToValKind::Scalar && tv.stream == "s_s" {
                        assert_eq!(tv.padded, Some(4));
                        found_padded = true;
                    }
                }
            }
        }
    }
    assert!(found_padded, "rescale conversion should be pad-to-vector");
}

#[test]
fn align_without_scalar_tovals_is_noop() {
    // Store-stream converted spattn has no callbacks at all.
    let f = parse_scf(ember::workloads::SPATTN_SRC).unwrap();
    let slc = lower_scf_to_slc(&f).unwrap();
    let (ss, note) = convert_store_streams(&slc);
    assert!(note.is_none(), "{note:?}");
    let (a, note) = align_queues(&ss);
    assert!(note.is_some());
    assert_eq!(a, ss);
}

#[test]
fn store_streams_eliminate_spattn_callbacks() {
    let f = parse_scf(ember::workloads::SPATTN_SRC).unwrap();
    let slc = lower_scf_to_slc(&f).unwrap();
    assert_eq!(slc.callback_count(), 1);
    let (ss, note) = convert_store_streams(&slc);
    assert!(note.is_none(), "{note:?}");
    assert_eq!(ss.callback_count(), 0);
    verify_slc(&ss).unwrap();
    let printed = print_slc(&ss);
    assert!(printed.contains("slc.store_str(out[s_orow, s_e], s_kv);"));

    // Full pipeline at opt3 with store streams still has zero callbacks and
    // preserves semantics.
    let cfg = PassConfig {
        opt: 3,
        vlen: 4,
        store_streams: true,
        ..Default::default()
    };
    let (opted, _) = run_passes(&slc, &cfg);
    assert_eq!(opted.callback_count(), 0);
    verify_slc(&opted).unwrap_or_else(|e| panic!("{e}\n{}", print_slc(&opted)));
    let dims = KernelDims::default();
    let inputs = gen_inputs(KernelKind::Spattn, &dims, Locality::Uniform, 3, false);
    let scf_out = interpret_scf(&f, &inputs).unwrap();
    let slc_out = interpret_slc(&opted, &inputs).unwrap();
    assert!(outputs_match(&scf_out, &slc_out, &["out"]));
}

#[test]
fn store_streams_refuse_compute_callbacks() {
    let f = parse_scf(ember::workloads::SLS_SRC).unwrap();
    let slc = lower_scf_to_slc(&f).unwrap();
    let (out, note) = convert_store_streams(&slc);
    assert_eq!(out, slc);
    assert!(note.unwrap().contains("copy"));
}

#[test]
fn load_hints_are_semantics_free() {
    let f = parse_scf(ember::workloads::SLS_SRC).unwrap();
    let slc = lower_scf_to_slc(&f).unwrap();
    let mut cfg = opt_config(2, 4);
    cfg.hints.insert(
        "vals".into(),
        ember::slc::LoadHint {
            cache_level: ember::slc::CacheLevel::L2,
            temporal: false,
        },
    );
    let (opted, _) = run_passes(&slc, &cfg);
    verify_slc(&opted).unwrap();
    let printed = print_slc(&opted);
    assert!(printed.contains("@ hint(L2, nontemporal)"));
    let dims = KernelDims::default();
    let inputs = gen_inputs(KernelKind::Sls, &dims, Locality::Uniform, 5, false);
    let want = interpret_scf(&f, &inputs).unwrap();
    let got = interpret_slc(&opted, &inputs).unwrap();
    assert!(outputs_match(&want, &got, &["out"]));
}

#[test]
fn vlen_one_is_bit_identical() {
    for kind in KernelKind::ALL {
        let dims = KernelDims::default();
        let f = build_kernel(kind, &dims).unwrap();
        let slc = lower_scf_to_slc(&f).unwrap();
        let (v, _) = vectorize(&slc, 1);
        let inputs = gen_inputs(kind, &dims, Locality::Uniform, 9, false);
        let a = interpret_slc(&slc, &inputs).unwrap();
        let b = interpret_slc(&v, &inputs).unwrap();
        for out in kernel_outputs(kind) {
            assert!(a.buffer(out).unwrap().bit_eq(b.buffer(out).unwrap()));
        }
    }
}

#[test]
fn optimized_forms_round_trip_through_text() {
    for kind in KernelKind::ALL {
        let f = build_kernel(kind, &KernelDims::default()).unwrap();
        let slc = lower_scf_to_slc(&f).unwrap();
        for (opt, vlen, ss) in [(1u8, 8u32, false), (2, 4, false), (3, 8, false), (3, 4, true)] {
            let cfg = PassConfig {
                opt,
                vlen,
                store_streams: ss,
                ..Default::default()
            };
            let (opted, _) = run_passes(&slc, &cfg);
            let printed = ember::slc::print_slc(&opted);
            let reparsed = ember::slc::parse_slc(&printed)
                .unwrap_or_else(|e| panic!("{} opt{opt}: {e}\n{printed}", kind.name()));
            assert_eq!(opted, reparsed, "{} opt{opt} v{vlen}", kind.name());
        }
    }
}
