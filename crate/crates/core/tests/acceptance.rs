mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use common::{alphabets, buffer_room, config_for, memory_for, random_text, report, rng, write_dna};
use era_core::hbuild::MIB;
use era_core::oracle::{
    check_edge_properties, find_brute, longest_repeat_depth, naive_lb, naive_tree, suffix_order, trees_equal,
};
use era_core::{
    build_index, build_virtual_tree, discover_prefixes, open_index, plan_build, prepare_subtree, write_index, Alphabet,
    BranchRecord, BuildConfig, BuildReport, PrepConfig, PrepSnapshot, RangePolicy, SubTree, Text, TextReader,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const WORKED: &[u8] = b"TGGTGGTGGTGCGGTGATGGTGC$";

fn br(c1: u8, c2: u8, offset: u64) -> BranchRecord {
    BranchRecord::new(c1, c2, offset)
}

fn reader(text: &[u8], alphabet: &Alphabet, block: usize) -> TextReader {
    TextReader::new(Text::from_bytes(text.to_vec(), alphabet).unwrap(), block).unwrap()
}

fn elastic(r_capacity: u64, skip: bool) -> PrepConfig {
    PrepConfig { policy: RangePolicy::Elastic { r_capacity }, skip }
}

#[test]
fn c01_worked_example_traces() {
    let dna = Alphabet::dna();
    let mut failures = Vec::new();
    let mut check = |what: &str, ok: bool| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    check("f_TG", find_brute(WORKED, b"TG") == vec![0, 3, 6, 9, 14, 17, 20]);
    check("f_A", find_brute(WORKED, b"A").len() == 1);
    for p in [&b"A"[..], b"C", b"TGA", b"TGC", b"TGGTGC", b"TGGTGGTGC"] {
        check("small prefix set", find_brute(WORKED, p).len() <= 2);
    }
    for (p, f) in [(&b"TGA"[..], 1), (b"TGC", 2), (b"TGG", 4), (b"TGT", 0)] {
        check("TG extensions", find_brute(WORKED, p).len() == f);
    }
    let tg_sorted: Vec<u64> =
        suffix_order(WORKED, &dna).into_iter().filter(|&i| WORKED[i as usize..].starts_with(b"TG")).collect();
    check("sorted TG suffixes", tg_sorted == vec![14, 9, 20, 6, 17, 3, 0]);

    let start = Instant::now();
    let mut r = reader(WORKED, &dna, 8);
    let mut snaps: Vec<PrepSnapshot> = Vec::new();
    let mut hook = |s: &PrepSnapshot| snaps.push(s.clone());
    let cfg = PrepConfig { policy: RangePolicy::Fixed(4), skip: true };
    let out = prepare_subtree(&mut r, b"TG", vec![0, 3, 6, 9, 14, 17, 20], &cfg, None, Some(&mut hook)).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let s = &snaps[0];
    let d = None;
    let strs = |v: &[&str]| -> Vec<Option<Vec<u8>>> {
        v.iter().map(|x| if x.is_empty() { None } else { Some(x.as_bytes().to_vec()) }).collect()
    };
    check("iteration 1 start/range", (s.iteration, s.start, s.range) == (1, 2, 4));
    check("iteration 1 I", s.i == vec![Some(5), Some(6), Some(3), d, d, Some(4), d]);
    check("iteration 1 A", s.a == vec![d, d, d, Some(1), Some(1), Some(2), Some(2)]);
    check("iteration 1 R", s.r == strs(&["ATGG", "CGGT", "C$", "GTGC", "GTGC", "GTGG", "GTGG"]));
    check("iteration 1 P", s.p == vec![4, 3, 6, 2, 5, 0, 1]);
    check("iteration 1 L", s.l == vec![14, 9, 20, 6, 17, 0, 3]);
    check(
        "iteration 1 B",
        s.b == vec![
            None,
            Some(br(b'A', b'C', 2)),
            Some(br(b'G', b'$', 3)),
            Some(br(b'C', b'G', 2)),
            None,
            Some(br(b'C', b'G', 5)),
            None,
        ],
    );

    check("iteration count", snaps.len() == 2);
    if let Some(s) = snaps.get(1) {
        check("iteration 2 R", s.r == strs(&["", "", "", "GGTG", "$", "TGCG", "TGGT"]));
        check("iteration 2 I/A done", s.i.iter().chain(&s.a).all(|x| x.is_none()));
        check("iteration 2 L", s.l == vec![14, 9, 20, 6, 17, 3, 0]);
    }
    check("final L", out.l == vec![14, 9, 20, 6, 17, 3, 0]);
    check(
        "final B",
        out.b
            == vec![
                br(b'A', b'C', 2),
                br(b'G', b'$', 3),
                br(b'C', b'G', 2),
                br(b'G', b'$', 6),
                br(b'C', b'G', 5),
                br(b'C', b'G', 8),
            ],
    );
    check("runtime", elapsed < 1.0);
    report(
        1,
        "worked example traces",
        failures.is_empty(),
        &format!("all six arrays after iteration 1 and final L/B exact in {elapsed:.4}s; mismatches: {failures:?}"),
    );
}

struct Case {
    alphabet: Alphabet,
    /// With the sentinel.
    text: Vec<u8>,
    f_m: u64,
    r_size: u64,
    workers: usize,
    index: PathBuf,
    built: Result<BuildReport, String>,
}

struct Corpus {
    cases: Vec<Case>,
}

/// Builds one random text under a random budget; `f_m` is swept over the
/// whole range `1..=n+1` and the buffers are kept tiny so that sorting
/// takes several elastic iterations.
fn random_case(rng: &mut ChaCha8Rng, dir: &std::path::Path, id: usize, max_len: usize) -> Case {
    let alphabet = alphabets()[id % 4].clone();
    let n = rng.gen_range(1..=max_len);
    let mut text = random_text(rng, &alphabet, n);
    text.push(alphabet.sentinel());
    let n1 = text.len() as u64;
    let f_m = match id % 8 {
        0 => 1,
        1 => n1,
        2 => rng.gen_range(1..=8.min(n1)),
        _ => (n1 as f64).powf(rng.gen::<f64>()).round().max(1.0) as u64,
    };
    let workers = if f_m >= 4 && rng.gen_ratio(1, 5) { 2 } else { 1 };
    let room = buffer_room(memory_for(f_m) / workers as u64);
    let bs = rng.gen_range(1..=(room / 2).clamp(1, 64));
    let r_size = rng.gen_range(1..=(room - bs).min(64));
    let mut config = config_for(f_m, r_size, bs);
    config.workers = workers;
    let index = dir.join(format!("case{id}.era"));
    let built = Text::from_bytes(text.clone(), &alphabet)
        .and_then(|t| build_index(&t, &index, &config))
        .map_err(|e| e.to_string());
    Case { alphabet, text, f_m, r_size, workers, index, built }
}

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-corpus");
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        let mut rng = rng(0xC0);
        let cases = (0..1000).map(|id| random_case(&mut rng, &dir, id, 2000)).collect();
        Corpus { cases }
    })
}

/// Compares one corpus index with the oracles; returns the first mismatch.
fn check_equivalence(case: &Case) -> Result<(), String> {
    let report = case.built.as_ref().map_err(|e| format!("build failed: {e}"))?;
    if report.record_f_m != case.f_m {
        return Err(format!("record limit {} instead of {}", report.record_f_m, case.f_m));
    }
    let text = Text::from_bytes(case.text.clone(), &case.alphabet).unwrap();
    let mut index = open_index(&case.index).map_err(|e| e.to_string())?;
    index.attach_text(text.clone()).map_err(|e| e.to_string())?;
    let full = index.assemble_full_tree().map_err(|e| e.to_string())?;
    if !trees_equal(&full, &naive_tree(&case.text, &case.alphabet), &case.text) {
        return Err("assembled tree differs from the naive tree".into());
    }
    let mut r = TextReader::new(text.clone(), 16).unwrap();
    for (k, entry) in index.trie().entries().iter().enumerate() {
        let expected = naive_lb(&case.text, &case.alphabet, &entry.prefix);
        let stored = index.load_subtree(k).map_err(|e| e.to_string())?;
        if stored.leaf_branches(&text).map_err(|e| e.to_string())? != expected {
            return Err(format!("stored (L,B) of {:?} differs", String::from_utf8_lossy(&entry.prefix)));
        }
        let sorted = prepare_subtree(
            &mut r,
            &entry.prefix,
            find_brute(&case.text, &entry.prefix),
            &elastic(case.r_size, true),
            None,
            None,
        )
        .map_err(|e| e.to_string())?;
        if (sorted.l, sorted.b) != expected {
            return Err(format!("prepared (L,B) of {:?} differs", String::from_utf8_lossy(&entry.prefix)));
        }
    }
    Ok(())
}

#[test]
fn c02_oracle_equivalence() {
    let start = Instant::now();
    let corpus = corpus();
    let mut failures = Vec::new();
    let mut sizes = BTreeSet::new();
    let (mut max_records, mut multi_iter, mut parallel) = (0usize, 0usize, 0usize);
    for (id, case) in corpus.cases.iter().enumerate() {
        sizes.insert(case.alphabet.base_symbols().len());
        if let Err(e) = check_equivalence(case) {
            failures.push(format!("case {id} (n={}, f_m={}): {e}", case.text.len(), case.f_m));
            continue;
        }
        let rep = case.built.as_ref().unwrap();
        max_records = max_records.max(rep.records.len());
        parallel += (case.workers > 1) as usize;
        if rep.groups.iter().flat_map(|g| &g.members).any(|m| m.passes > 1) {
            multi_iter += 1;
        }
    }
    let f_ends = corpus.cases.iter().filter(|c| c.f_m == 1).count()
        + corpus.cases.iter().filter(|c| c.f_m == c.text.len() as u64).count();
    report(
        2,
        "oracle equivalence",
        failures.is_empty(),
        &format!(
            "{} texts, alphabet sizes {sizes:?}, {f_ends} at the ends of the f_m sweep, up to {max_records} sub-trees, \
             {multi_iter} with several fill iterations, {parallel} with 2 workers, {:.1}s; failures: {:?}",
            corpus.cases.len(),
            start.elapsed().as_secs_f64(),
            &failures[..failures.len().min(5)]
        ),
    );
}

#[test]
fn c03_edge_properties() {
    let corpus = corpus();
    let mut failures = Vec::new();
    let mut trees = 0usize;
    for (id, case) in corpus.cases.iter().enumerate() {
        let index = match open_index(&case.index) {
            Ok(i) => i,
            Err(e) => {
                failures.push(format!("case {id}: {e}"));
                continue;
            }
        };
        for k in 0..index.trie().len() {
            let tree = index.load_subtree(k).unwrap();
            let v = check_edge_properties(&case.text, &case.alphabet, &tree);
            trees += 1;
            if !v.is_empty() {
                failures.push(format!("case {id} record {k}: {:?}", v[0]));
            }
        }
    }
    report(
        3,
        "edge properties",
        failures.is_empty(),
        &format!("{trees} sub-trees checked; failures: {:?}", &failures[..failures.len().min(5)]),
    );
}

#[test]
fn c04_queries() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng(0xC4);
    let mut failures = Vec::new();
    let (mut present, mut absent) = (0usize, 0usize);
    for id in 0..200 {
        let case = random_case(&mut rng, dir.path(), id, 500);
        if let Err(e) = &case.built {
            failures.push(format!("text {id}: build failed: {e}"));
            continue;
        }
        let mut index = open_index(&case.index).unwrap();
        index.attach_text(Text::from_bytes(case.text.clone(), &case.alphabet).unwrap()).unwrap();
        let t = &case.text;
        let mut patterns: BTreeSet<&[u8]> = BTreeSet::new();
        for i in 0..t.len() {
            for len in 1..=8.min(t.len() - i) {
                patterns.insert(&t[i..i + len]);
            }
        }
        for p in &patterns {
            if index.find(p).ok() != Some(find_brute(t, p)) {
                failures.push(format!("text {id}: find({:?})", String::from_utf8_lossy(p)));
            }
        }
        present += patterns.len();

        let symbols: Vec<u8> = case.alphabet.symbols().collect();
        let mut missing = 0;
        while missing < 100 {
            let len = rng.gen_range(1..=16);
            let p: Vec<u8> = (0..len).map(|_| symbols[rng.gen_range(0..symbols.len())]).collect();
            if !find_brute(t, &p).is_empty() {
                continue;
            }
            if index.find(&p).ok() != Some(Vec::new()) {
                failures.push(format!("text {id}: absent {:?}", String::from_utf8_lossy(&p)));
            }
            missing += 1;
        }
        absent += missing;

        let all: Result<Vec<u64>, _> = index.enumerate_suffixes().collect();
        if all.ok() != Some(suffix_order(t, &case.alphabet)) {
            failures.push(format!("text {id}: suffix enumeration"));
        }
    }
    report(
        4,
        "query correctness",
        failures.is_empty(),
        &format!(
            "200 texts, {present} substrings and {absent} non-substrings matched brute force, suffix order exact; failures: {:?}",
            &failures[..failures.len().min(5)]
        ),
    );
}

/// DNA with a block of a short repeated motif in the middle, so that the
/// deep sorting passes only touch a few blocks.
fn clustered_dna(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    let motif = b"ACGTTGCA";
    let mut t: Vec<u8> = (0..n).map(|_| b"ACGT"[rng.gen_range(0..4)]).collect();
    let from = n / 2;
    for (k, x) in t[from..from + n / 16].iter_mut().enumerate() {
        *x = motif[k % motif.len()];
    }
    t
}

#[test]
fn c05_io_discipline() {
    let dna = Alphabet::dna();
    let mut rng = rng(0xC5);
    let mut failures = Vec::new();

    let mut bounded = 0usize;
    let mut check_bound = |text: &[u8], alphabet: &Alphabet, rep: &BuildReport, failures: &mut Vec<String>| {
        for m in rep.groups.iter().flat_map(|g| &g.members) {
            let ok = match longest_repeat_depth(text, alphabet, m.prefix.as_bytes()) {
                Some(lp) => m.passes <= lp + 1 - m.prefix.len() as u64,
                None => m.passes == 0,
            };
            bounded += 1;
            if !ok {
                failures.push(format!("{:?} took {} passes", m.prefix, m.passes));
            }
        }
    };
    for case in &corpus().cases {
        if let Ok(rep) = &case.built {
            check_bound(&case.text, &case.alphabet, rep, &mut failures);
        }
    }

    let (mut traced_passes, mut read_skip, mut read_full, mut skipped) = (0usize, 0u64, 0u64, 0u64);
    let texts = [
        (0..1 << 16).map(|_| b"ACGT"[rng.gen_range(0..4)]).collect::<Vec<u8>>(),
        clustered_dna(&mut rng, 1 << 16),
        clustered_dna(&mut rng, 1 << 17),
    ];
    for raw in texts {
        let text = Text::from_bytes(raw.clone(), &dna).unwrap();
        let mut with_sentinel = raw.clone();
        with_sentinel.push(b'$');
        let config = config_for(4000, 4096, 256);
        let rep = build_index(&text, tempfile::NamedTempFile::new().unwrap().path(), &config).unwrap();
        check_bound(&with_sentinel, &dna, &rep, &mut failures);

        let plan = plan_build(&text, &config).unwrap();
        let mut outputs: Vec<Vec<SubTree>> = Vec::new();
        for skip in [false, true] {
            let mut r = TextReader::new(text.clone(), 256).unwrap();
            r.enable_block_trace();
            let mut trees = Vec::new();
            for g in &plan.groups {
                build_virtual_tree(&mut r, g, plan.work_f_m, &elastic(4096, skip), None, None, |_, a| {
                    trees.push(a.to_subtree());
                    Ok(())
                })
                .unwrap();
            }
            for pass in r.block_trace().unwrap() {
                traced_passes += 1;
                if pass.windows(2).any(|w| w[0] > w[1]) {
                    failures.push("block offsets decrease within a pass".into());
                }
            }
            let st = r.stats();
            if skip {
                read_skip += st.blocks_read;
                skipped += st.blocks_skipped;
            } else {
                read_full += st.blocks_read;
            }
            outputs.push(trees);
        }
        if outputs[0] != outputs[1] {
            failures.push("skipping changed the sub-trees".into());
        }

        for _ in 0..200 {
            let mut req: Vec<(u64, usize)> =
                (0..rng.gen_range(1..50)).map(|_| (rng.gen_range(0..raw.len() as u64), rng.gen_range(0..40))).collect();
            req.sort();
            let mut got = Vec::new();
            let mut blocks = Vec::new();
            for skip in [false, true] {
                let mut r = TextReader::new(text.clone(), 64).unwrap();
                got.push(r.gather_ranges_vec(&req, skip).unwrap());
                blocks.push(r.stats().blocks_read);
            }
            if got[0] != got[1] || blocks[1] > blocks[0] {
                failures.push("gather payload or block count differs".into());
            }
        }
    }
    if read_skip > read_full {
        failures.push(format!("skipping read {read_skip} blocks, full reads {read_full}"));
    }
    report(
        5,
        "I/O discipline",
        failures.is_empty(),
        &format!(
            "{traced_passes} traced gather passes monotone, pass bound held for {bounded} sub-trees, \
             blocks read {read_skip} with skipping vs {read_full} without ({skipped} skipped), identical output; \
             failures: {:?}",
            &failures[..failures.len().min(5)]
        ),
    );
}

#[test]
fn c06_virtual_tree_amortization() {
    let dna = Alphabet::dna();
    let mut rng = rng(0xC6);
    let raw: Vec<u8> = (0..2 * MIB)
        .map(|_| {
            let x: f64 = rng.gen();
            match x {
                x if x < 0.55 => b'A',
                x if x < 0.75 => b'C',
                x if x < 0.92 => b'G',
                _ => b'T',
            }
        })
        .collect();
    let text = Text::from_bytes(raw, &dna).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for no_grouping in [false, true] {
        let mut config = config_for(20_000, 256 << 10, 64 << 10);
        config.no_grouping = no_grouping;
        let start = Instant::now();
        let rep = build_index(&text, dir.path().join(format!("g{no_grouping}.era")), &config).unwrap();
        runs.push((rep, start.elapsed().as_secs_f64()));
    }
    let (grouped, ungrouped) = (&runs[0].0, &runs[1].0);
    let bytes = |no: bool| std::fs::read(dir.path().join(format!("g{no}.era"))).unwrap();
    let multi = grouped.groups.iter().filter(|g| g.members.len() > 1).count();
    let (pg, pu) = (grouped.build_stats.passes, ungrouped.build_stats.passes);
    let saved = 100.0 * (pu as f64 - pg as f64) / pu as f64;
    report(
        6,
        "virtual-tree amortization",
        multi > 0 && pg < pu && bytes(false) == bytes(true),
        &format!(
            "{} groups ({multi} with several members) vs {} single prefixes: {pg} vs {pu} passes over the text, \
             {saved:.1}% fewer; {:.2}s vs {:.2}s",
            grouped.group_count, ungrouped.group_count, runs[0].1, runs[1].1
        ),
    );
}

#[test]
fn c07_elastic_range() {
    let dna = Alphabet::dna();
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for (w, k, f_m) in [(&b"ACG"[..], 100, 40), (b"ACG", 1000, 300), (b"AAC", 500, 120)] {
        let mut raw = w.repeat(k);
        raw.push(b'$');
        let mut r = reader(&raw, &dna, 64);
        let prefixes = discover_prefixes(&mut r, &dna, f_m).unwrap();
        let (mut pe, mut pf) = (0u64, 0u64);
        for e in &prefixes {
            let occ = find_brute(&raw, &e.prefix);
            let fixed = PrepConfig { policy: RangePolicy::Fixed(16), skip: true };
            let a = prepare_subtree(&mut r, &e.prefix, occ.clone(), &elastic(16 * f_m, true), None, None).unwrap();
            let b = prepare_subtree(&mut r, &e.prefix, occ, &fixed, None, None).unwrap();
            if a.ranges.windows(2).any(|x| x[0] > x[1]) {
                failures.push(format!("ranges {:?} decrease", a.ranges));
            }
            if (&a.l, &a.b) != (&b.l, &b.b) || a.passes > b.passes {
                failures.push(format!("{:?}: {} vs {} passes", String::from_utf8_lossy(&e.prefix), a.passes, b.passes));
            }
            pe += a.passes;
            pf += b.passes;
        }
        lines.push(format!("{}^{k}: {pe} vs {pf}", String::from_utf8_lossy(w)));
    }
    report(
        7,
        "elastic range",
        failures.is_empty(),
        &format!(
            "fill passes elastic vs fixed 16 ({}), ranges non-decreasing; failures: {:?}",
            lines.join(", "),
            &failures[..failures.len().min(5)]
        ),
    );
}

fn sha256_file(path: &std::path::Path) -> String {
    let mut h = Sha256::new();
    std::io::copy(&mut std::fs::File::open(path).unwrap(), &mut h).unwrap();
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn c08_parallel_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("dna.txt");
    write_dna(&input, 50 << 20, 0xC8);
    let text = Text::open(&input, &Alphabet::dna()).unwrap();
    let mut hashes = Vec::new();
    let mut lines = Vec::new();
    for workers in [1, 2, 4, 8] {
        let mut config = BuildConfig::new(256 * MIB);
        config.workers = workers;
        let out = dir.path().join(format!("w{workers}.era"));
        let start = Instant::now();
        let rep = build_index(&text, &out, &config).unwrap();
        let secs = start.elapsed().as_secs_f64();
        hashes.push(sha256_file(&out));
        lines.push(format!("{workers} workers {secs:.1}s ({} groups)", rep.group_count));
        std::fs::remove_file(&out).unwrap();
    }
    let same = hashes.windows(2).all(|w| w[0] == w[1]);
    report(
        8,
        "parallel determinism",
        same,
        &format!("50 MiB DNA, sha256 {} for all: {}", &hashes[0][..16], lines.join(", ")),
    );
}

#[test]
fn c09_memory_discipline() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("dna.txt");
    let n = 64 << 20;
    write_dna(&input, n, 0xC9);
    let dna = Alphabet::dna();
    let text = Text::open(&input, &dna).unwrap();
    let budget = 8 * MIB;
    let out = dir.path().join("big.era");
    let start = Instant::now();
    let built = build_index(&text, &out, &BuildConfig::new(budget));
    let secs = start.elapsed().as_secs_f64();
    let rep = match built {
        Ok(r) => r,
        Err(e) => return report(9, "memory discipline", false, &format!("build failed: {e}")),
    };

    let mut raw = std::fs::read(&input).unwrap();
    raw.push(b'$');
    let mut index = open_index(&out).unwrap();
    index.attach_text(text).unwrap();
    let mut rng = rng(0xC9);
    let mut wrong = 0;
    for q in 0..24 {
        let p: Vec<u8> = if q % 4 == 3 {
            (0..14).map(|_| b"ACGT"[rng.gen_range(0..4)]).collect()
        } else {
            let at = rng.gen_range(0..raw.len() - 12);
            raw[at..at + rng.gen_range(8..=12)].to_vec()
        };
        if index.find(&p).unwrap() != find_brute(&raw, &p) {
            wrong += 1;
        }
    }
    let pass = rep.peak_memory <= budget && secs < 600.0 && wrong == 0;
    report(
        9,
        "memory discipline",
        pass,
        &format!(
            "64 MiB text in {secs:.1}s, tracked peak {} of {budget} bytes, {} groups, {} passes, \
             {} index bytes, {wrong} of 24 spot queries wrong",
            rep.peak_memory, rep.group_count, rep.total_stats.passes, rep.index_bytes
        ),
    );
}

#[test]
fn c10_round_trip() {
    let corpus = corpus();
    let dir = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();
    for (id, case) in corpus.cases.iter().enumerate() {
        let copy = dir.path().join("copy.era");
        let result = open_index(&case.index).and_then(|index| {
            let trees: Vec<SubTree> =
                (0..index.trie().len()).map(|k| index.load_subtree(k)).collect::<Result<_, _>>()?;
            write_index(&copy, index.text_len(), index.trie().clone(), &trees)
        });
        let same = result.is_ok() && std::fs::read(&case.index).ok() == std::fs::read(&copy).ok();
        if !same {
            failures.push(format!("case {id}: {result:?}"));
        }
    }
    report(
        10,
        "serialization round trip",
        failures.is_empty(),
        &format!(
            "{} indexes rewritten byte for byte; failures: {:?}",
            corpus.cases.len(),
            &failures[..failures.len().min(5)]
        ),
    );
}
