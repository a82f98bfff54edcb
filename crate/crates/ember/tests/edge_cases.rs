//! Edge cases named by the module contracts: verifier diagnostics,
//! degenerate programs, and instrumentation details.

use ember::dlc::{parse_dlc, print_dlc, verify_dlc};
use ember::mem::{Buffer, MemImage};
use ember::slc::{interpret_slc, parse_slc, verify_slc};
use ember::types::ElemType;
use ember::vm::{check_interleavings, run, VmConfig};

#[test]
fn slc_two_sibling_loops_rejected() {
    let src = r#"
void f(a: mref<? x f32>, o: mref<? x f32>, n: idx) {
  slc.for(str s_i from 0 to n step 1) {
    str s_x = slc.mem_str(a[s_i]);
    slc.for(str s_j from 0 to n step 1) {
      slc.callback {
        f32 x = slc.to_val(s_x);
        o[0] = x;
      }
    }
    slc.for(str s_k from 0 to n step 1) {
      slc.callback {
        f32 x = slc.to_val(s_x);
        o[1] = x;
      }
    }
  }
}
"#;
    let f = parse_slc(src).unwrap();
    let err = verify_slc(&f).unwrap_err();
    assert!(err.to_string().contains("at most one nested loop"), "{err}");
}

#[test]
fn slc_stream_read_without_conversion_rejected() {
    let src = r#"
void f(a: mref<? x f32>, o: mref<? x f32>, n: idx) {
  slc.for(str s_i from 0 to n step 1) {
    str s_x = slc.mem_str(a[s_i]);
    slc.callback {
      o[0] = s_x;
    }
  }
}
"#;
    let f = parse_slc(src).unwrap();
    let err = verify_slc(&f).unwrap_err();
    assert!(
        err.to_string().contains("without a to_val conversion"),
        "{err}"
    );
}

#[test]
fn slc_push_without_buffer_rejected() {
    // A push whose target buffer was never declared anywhere in scope.
    let src = r#"
void f(a: mref<? x f32>, o: mref<? x f32>, n: idx) {
  slc.for(str s_i from 0 to n step 1) {
    str s_x = slc.mem_str(a[s_i]);
    slc.push(buf, s_x);
    slc.callback {
      f32 x = slc.to_val(s_x);
      o[0] = x;
    }
  }
}
"#;
    let f = parse_slc(src).unwrap();
    let err = verify_slc(&f).unwrap_err();
    assert!(err.to_string().contains("no buffer stream"), "{err}");
    // A declared buffer pushed from its own declaring loop is also invalid:
    // pushes must come from the inner loop.
    let src = r#"
void f(a: mref<? x ? x f32>, o: mref<? x f32>, n: idx, m: idx) {
  slc.for(str s_i from 0 to n step 1) {
    str<vec<2 x f32>> buf = slcv.buf_str();
    slcv.for<2>((str s_j, str msk) from 0 to m step 1) {
      str s_x = slcv.mem_str<2>(a[s_i, s_j], msk);
      slc.push(buf, s_x);
    }
    slc.callback {
      chunks<2 x f32> bv = slc.to_val(buf);
      for(idx j = 0; j < m; j += 2) {
        vmask<2> mk = mask<2>(j, m);
        vec<2 x f32> v = bv[j];
        vstore<2>(v, o[j], mk);
      }
    }
  }
}
"#;
    let f = parse_slc(src).unwrap();
    verify_slc(&f).unwrap();
}

#[test]
fn slc_function_without_callbacks_leaves_memory_unchanged() {
    let src = r#"
void f(a: mref<? x f32>, o: mref<? x f32>, n: idx) {
  slc.for(str s_i from 0 to n step 1) {
    str s_x = slc.mem_str(a[s_i]);
  }
}
"#;
    let f = parse_slc(src).unwrap();
    let inputs = MemImage::new()
        .with_buffer("a", Buffer::from_f32(vec![4], vec![1.0, 2.0, 3.0, 4.0]))
        .with_buffer("o", Buffer::zeros(ElemType::F32, vec![4]))
        .with_scalar("n", 4);
    let out = interpret_slc(&f, &inputs).unwrap();
    assert!(out.bit_eq(&inputs));
}

#[test]
fn empty_access_program_prints_header_only() {
    let src = r#"
dlc empty(o: mref<? x f32>) {
  access {
  }
  execute {
    while(tkn = ctrlQ.pop() != done) {
    }
  }
}
"#;
    let p = parse_dlc(src).unwrap();
    assert!(p.access.units.is_empty());
    let printed = print_dlc(&p);
    assert!(printed.contains("access {\n  }"));
    let reparsed = parse_dlc(&printed).unwrap();
    assert_eq!(p, reparsed);
    // Runs to completion immediately: the access engine only sends done.
    let inputs = MemImage::new().with_buffer("o", Buffer::zeros(ElemType::F32, vec![1]));
    let res = run(&p, &inputs, &VmConfig::default()).unwrap();
    assert_eq!(res.counters.ctrl_pushes, 1);
    assert_eq!(res.counters.callback_invocations, 0);
}

#[test]
fn memory_request_counters_on_tiny_sls() {
    let f = ember::scf::parse_scf(ember::workloads::SLS_SRC).unwrap();
    let slc = ember::decouple::lower_scf_to_slc(&f).unwrap();
    let dlc = ember::dlc::lower_slc_to_dlc(&slc).unwrap();
    let inputs = MemImage::new()
        .with_buffer("ptrs", Buffer::from_index(vec![3], vec![0, 2, 3]))
        .with_buffer("idxs", Buffer::from_index(vec![3], vec![1, 0, 2]))
        .with_buffer("vals", Buffer::from_f32(vec![3, 2], vec![1.0; 6]))
        .with_buffer("out", Buffer::zeros(ElemType::F32, vec![2, 2]))
        .with_scalar("n_batches", 2)
        .with_scalar("emb_len", 2);
    let res = run(&dlc, &inputs, &VmConfig::default()).unwrap();
    // Access side: ptrs twice per batch, idxs once per lookup, vals once per
    // element: 2*2 + 3 + 6 = 13.
    assert_eq!(res.counters.mem_requests_access, 13);
    // Execute side: the accumulate arm loads and stores out per element.
    assert_eq!(res.counters.mem_requests_execute, 12);
}

#[test]
fn corrupted_program_is_caught_by_the_differential_check() {
    // Flip the accumulation into a subtraction behind the verifier's back;
    // the oracle comparison must notice.
    let f = ember::scf::parse_scf(ember::workloads::SLS_SRC).unwrap();
    let slc = ember::decouple::lower_scf_to_slc(&f).unwrap();
    let dlc = ember::dlc::lower_slc_to_dlc(&slc).unwrap();
    let tampered = print_dlc(&dlc).replace("out[b, e] = acc + val;", "out[b, e] = acc - val;");
    let bad = parse_dlc(&tampered).unwrap();
    verify_dlc(&bad).unwrap();
    let dims = ember::workloads::KernelDims::default();
    let inputs = ember::workloads::gen_inputs(
        ember::workloads::KernelKind::Sls,
        &dims,
        ember::workloads::Locality::Uniform,
        4,
        false,
    );
    let want = ember::scf::interpret_scf(&f, &inputs).unwrap();
    let got = run(&bad, &inputs, &VmConfig::default()).unwrap();
    assert!(
        !want.buffer("out").unwrap().bit_eq(got.mem.buffer("out").unwrap()),
        "the tampered program must diverge from the oracle"
    );
}

#[test]
fn i32_buffers_flow_through_the_whole_pipeline() {
    let src = r#"
void addone(a: mref<? x i32>, o: mref<? x i32>, n: idx) {
  for(idx i = 0; i < n; i++) {
    i32 x = a[i];
    o[i] = x + 1;
  }
}
"#;
    let f = ember::scf::parse_scf(src).unwrap();
    ember::scf::verify_scf(&f).unwrap();
    let slc = ember::decouple::lower_scf_to_slc(&f).unwrap();
    let dlc = ember::dlc::lower_slc_to_dlc(&slc).unwrap();
    verify_dlc(&dlc).unwrap();
    let inputs = MemImage::new()
        .with_buffer(
            "a",
            ember::mem::Buffer {
                elem: ElemType::I32,
                shape: vec![4],
                data: ember::mem::BufferData::I32(vec![-3, 0, 7, 41]),
            },
        )
        .with_buffer(
            "o",
            ember::mem::Buffer {
                elem: ElemType::I32,
                shape: vec![4],
                data: ember::mem::BufferData::I32(vec![0; 4]),
            },
        )
        .with_scalar("n", 4);
    let want = ember::scf::interpret_scf(&f, &inputs).unwrap();
    let got = run(&dlc, &inputs, &VmConfig::default()).unwrap();
    assert!(want.buffer("o").unwrap().bit_eq(got.mem.buffer("o").unwrap()));
    match &got.mem.buffer("o").unwrap().data {
        ember::mem::BufferData::I32(v) => assert_eq!(v, &vec![-2, 1, 8, 42]),
        other => panic!("unexpected buffer data {other:?}"),
    }
}

#[test]
fn interleaving_checker_accepts_correct_programs() {
    let f = ember::scf::parse_scf(ember::workloads::KG_SRC).unwrap();
    let slc = ember::decouple::lower_scf_to_slc(&f).unwrap();
    let (opted, _) = ember::passes::run_passes(
        &slc,
        &ember::passes::PassConfig {
            opt: 2,
            vlen: 4,
            ..Default::default()
        },
    );
    let dlc = ember::dlc::lower_slc_to_dlc(&opted).unwrap();
    let dims = ember::workloads::KernelDims {
        batches: 5,
        rows: 16,
        emb_len: 6,
        ..Default::default()
    };
    let inputs = ember::workloads::gen_inputs(
        ember::workloads::KernelKind::Kg,
        &dims,
        ember::workloads::Locality::Uniform,
        2,
        false,
    );
    let seeds: Vec<u64> = (0..10).collect();
    let cfg = VmConfig {
        data_capacity: 2,
        ..Default::default()
    };
    check_interleavings(&dlc, &inputs, &cfg, &seeds).unwrap();
}
