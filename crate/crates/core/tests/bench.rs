use std::sync::Arc;

use kzg_bptree::bench::{iavl_model_bytes, levels_for, random_tree, run, write_csv};
use kzg_bptree::polycommit::PublicParams;
use kzg_bptree::proofs::{proof_size, Proof};

#[test]
fn small_sweep_rows() {
    let params = Arc::new(PublicParams::test_mode(16, 9).unwrap());
    let rows = run(params.clone(), 16, &[100, 3_000], &[1_000_000], 20, 4).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(!rows[0].extrapolated && !rows[1].extrapolated && rows[2].extrapolated);
    assert!(rows[0].levels <= rows[1].levels);
    assert!(rows[2].levels >= levels_for(16, 1_000_000));
    assert!(rows[1].membership_bytes > rows[0].membership_bytes);
    assert!(rows[2].membership_bytes > rows[1].membership_bytes);
    for r in &rows {
        assert_eq!(r.iavl_model_bytes, iavl_model_bytes(r.n));
        assert_eq!(r.rsa_model_bytes, 1500.0);
        assert_eq!(r.qary_model_bytes, 1000.0);
    }

    let mut out = Vec::new();
    write_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let parsed: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(parsed.len(), 3);
    for rec in &parsed {
        for field in rec.iter() {
            field.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn measured_levels_track_tree_height() {
    let params = Arc::new(PublicParams::test_mode(8, 9).unwrap());
    let (tree, keys) = random_tree(params, 8, 500, 1).unwrap();
    let snap = tree.snapshot();
    let p = snap.prove_membership(&keys[17]).unwrap();
    assert_eq!(p.levels.len(), snap.height());
    // fixed-length keys give one size per level kind
    let root = kzg_bptree::proofs::level_size(&p.levels[0]);
    let inner = kzg_bptree::proofs::level_size(&p.levels[1]);
    assert_eq!(proof_size(&Proof::Membership(p.clone())), 3 + root + inner * (p.levels.len() - 1));
}
