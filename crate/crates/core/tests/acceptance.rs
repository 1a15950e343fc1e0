//! End-to-end acceptance run.  Prints one PASS/FAIL line per criterion and
//! exits with status 1 if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slocc_core::classifier::{
    classify, classify_state, critical_exists, critical_exists_value, orbit_dim_diagonal, polystable_limit,
    stabilizer_dim_diagonal, strictly_semistable_exists, verify_main_theorem, OrbitType,
};
use slocc_core::enumerate::enumerate_classes;
use slocc_core::error::Error;
use slocc_core::geometry::{balance, critical_diag_state, WeightedVector};
use slocc_core::normalform::{normal_form_with, NormalFormOptions, Verdict};
use slocc_core::pencil::{
    compute_kcf, kcf_to_pencil, moebius_equivalent, moebius_on_kcf, pencil_from_state, representative_state,
    KroneckerStructure,
};
use slocc_core::tensor::StateTensor;
use slocc_core::witness::{evaluate_family, limit_structure, norm_ratio, witness_for};

const KCF_TOL: f64 = 1e-9;
const EQUIV_TOL: f64 = 1e-6;
const WITNESS_ALPHA: f64 = 40.0;

/// One row of the reference tables, kept as text until parameters are chosen.
#[derive(Debug, Clone)]
struct RefRow {
    m: usize,
    n: usize,
    number: usize,
    orbit_type: OrbitType,
    slices: [Vec<Ket>; 2],
    closure: Option<usize>,
}

#[derive(Debug, Clone)]
struct Ket {
    j: usize,
    k: usize,
    /// Index into the parameter list, `None` for coefficient one.
    param: Option<usize>,
}

impl RefRow {
    fn param_count(&self) -> usize {
        self.slices.iter().flatten().filter_map(|k| k.param.map(|p| p + 1)).max().unwrap_or(0)
    }

    fn state(&self, params: &[Complex64]) -> StateTensor {
        let mut entries = Vec::new();
        for (i, kets) in self.slices.iter().enumerate() {
            for ket in kets {
                let coeff = ket.param.map_or(Complex64::new(1.0, 0.0), |p| params[p]);
                entries.push(([i, ket.j, ket.k], coeff));
            }
        }
        StateTensor::from_entries(self.m, self.n, &entries).expect("reference row fits its table")
    }

    fn structure(&self, params: &[Complex64]) -> Result<KroneckerStructure, Error> {
        compute_kcf(&pencil_from_state(&self.state(params)), KCF_TOL)
    }

    fn label(&self) -> String {
        format!("2x{}x{} #{}", self.m, self.n, self.number)
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Admissible parameter choices for a row with `count` parameters, all
/// distinct from 0, 1, infinity and from each other.
fn parameter_choices(count: usize) -> Vec<Vec<Complex64>> {
    match count {
        0 => vec![vec![]],
        1 => vec![vec![c(2.0, 0.0)], vec![c(-1.0, 0.0)], vec![c(0.5, 1.5)]],
        2 => vec![
            vec![c(2.0, 0.0), c(3.0, 0.0)],
            vec![c(-1.0, 0.0), c(0.5, 1.5)],
            vec![c(1.0, 1.0), c(-2.5, 0.0)],
        ],
        _ => unreachable!("reference rows have at most two parameters"),
    }
}

fn parse_type(text: &str) -> OrbitType {
    match text {
        "NC" => OrbitType::NullCone,
        "SSS" => OrbitType::StrictlySemistable,
        "SPS" => OrbitType::StrictlyPolystable,
        "S" => OrbitType::Stable,
        other => panic!("unknown type tag {other}"),
    }
}

fn parse_ket(token: &str) -> Ket {
    let (digits, param) = match token.split_once('*') {
        Some((d, "x" | "x1")) => (d, Some(0)),
        Some((d, "x2")) => (d, Some(1)),
        Some((_, other)) => panic!("unknown coefficient {other}"),
        None => (token, None),
    };
    let digits: Vec<usize> = digits.chars().map(|ch| ch.to_digit(10).expect("ket digit") as usize).collect();
    assert_eq!(digits.len(), 2, "ket {token}");
    Ket { j: digits[0], k: digits[1], param }
}

fn load_tables() -> Vec<RefRow> {
    let text = include_str!("data/reference_tables.txt");
    let mut rows = Vec::new();
    let mut shape = (0, 0);
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        if let Some(rest) = line.strip_prefix("table ") {
            let dims: Vec<usize> = rest.split_whitespace().map(|t| t.parse().unwrap()).collect();
            shape = (dims[0], dims[1]);
            continue;
        }
        let (body, closure) = match line.split_once('>') {
            Some((b, target)) => (b, Some(target.trim().parse().unwrap())),
            None => (line, None),
        };
        let (left, right) = body.split_once('/').expect("two slices");
        let mut head = left.split_whitespace();
        let number = head.next().unwrap().parse().unwrap();
        let orbit_type = parse_type(head.next().unwrap());
        let slice0 = head.map(parse_ket).collect();
        let slice1 = right.split_whitespace().map(parse_ket).collect();
        rows.push(RefRow { m: shape.0, n: shape.1, number, orbit_type, slices: [slice0, slice1], closure });
    }
    rows
}

const SHAPES: [(usize, usize, usize); 9] =
    [(2, 2, 2), (2, 3, 2), (2, 4, 1), (3, 3, 6), (3, 4, 5), (3, 5, 2), (4, 4, 16), (4, 5, 12), (5, 5, 34)];

type Key = (Vec<usize>, Vec<usize>, Vec<Vec<usize>>);

fn key_of(cols: &[usize], rows: &[usize], signatures: Vec<Vec<usize>>) -> Key {
    let mut cols = cols.to_vec();
    let mut rows = rows.to_vec();
    cols.sort_unstable();
    rows.sort_unstable();
    let mut sigs: Vec<Vec<usize>> = signatures
        .into_iter()
        .map(|mut s| {
            s.sort_unstable_by(|a, b| b.cmp(a));
            s
        })
        .collect();
    sigs.sort();
    (cols, rows, sigs)
}

fn structure_key(ks: &KroneckerStructure) -> Key {
    key_of(ks.col_indices(), ks.row_indices(), ks.loci().iter().map(|l| l.signature.clone()).collect())
}

type Outcome = Result<String, String>;

fn golden_tables(rows: &[RefRow]) -> Outcome {
    let start = Instant::now();
    let mut enumerated = BTreeMap::new();
    for &(m, n, _) in &SHAPES {
        enumerated.insert((m, n), enumerate_classes(m, n).map_err(|e| format!("2x{m}x{n}: {e}"))?);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let mut problems = Vec::new();
    for &(m, n, expected) in &SHAPES {
        let families = &enumerated[&(m, n)];
        if families.len() != expected {
            problems.push(format!("2x{m}x{n}: {} families, expected {expected}", families.len()));
        }
        let mut unmatched: BTreeMap<Key, OrbitType> = families
            .iter()
            .map(|f| (key_of(&f.structure.col_indices, &f.structure.row_indices, f.structure.signatures()), f.orbit_type))
            .collect();
        for row in rows.iter().filter(|r| (r.m, r.n) == (m, n)) {
            let params = &parameter_choices(row.param_count())[0];
            let ks = match row.structure(params) {
                Ok(ks) => ks,
                Err(e) => {
                    problems.push(format!("{}: {e}", row.label()));
                    continue;
                }
            };
            match unmatched.remove(&structure_key(&ks)) {
                Some(t) if t == row.orbit_type => {}
                Some(t) => problems.push(format!("{}: enumerated as {}, table says {}", row.label(), t.label(), row.orbit_type.label())),
                None => problems.push(format!("{}: no unmatched family with this structure", row.label())),
            }
        }
        if !unmatched.is_empty() {
            problems.push(format!("2x{m}x{n}: {} families without a table row", unmatched.len()));
        }
    }
    if elapsed >= 10.0 {
        problems.push(format!("enumeration took {elapsed:.2} s"));
    }
    if problems.is_empty() {
        Ok(format!("{} rows matched one-to-one, enumeration {elapsed:.2} s", rows.len()))
    } else {
        Err(problems.join("; "))
    }
}

fn pipeline(rows: &[RefRow]) -> Outcome {
    let mut checked = 0;
    let mut problems = Vec::new();
    for row in rows {
        for params in parameter_choices(row.param_count()) {
            checked += 1;
            match row.structure(&params).and_then(|ks| classify(&ks)) {
                Ok(t) if t == row.orbit_type => {}
                Ok(t) => problems.push(format!("{} {params:?}: {}", row.label(), t.label())),
                Err(e) => problems.push(format!("{} {params:?}: {e}", row.label())),
            }
        }
    }
    if problems.is_empty() {
        Ok(format!("{checked} instances classified correctly"))
    } else {
        Err(format!("{} mismatches: {}", problems.len(), problems.join("; ")))
    }
}

fn semistable_existence() -> Outcome {
    let mut problems = Vec::new();
    for m in 2..=6 {
        for n in m..=6 {
            let families = enumerate_classes(m, n).map_err(|e| e.to_string())?;
            let found = families.iter().any(|f| f.orbit_type == OrbitType::StrictlySemistable);
            let predicted = strictly_semistable_exists(m, n);
            if found != predicted || predicted != (m == n && m >= 4) {
                problems.push(format!("2x{m}x{n}: enumerated {found}, predicted {predicted}"));
            }
        }
    }
    if problems.is_empty() {
        Ok("agrees for all 2 <= m <= n <= 6".into())
    } else {
        Err(problems.join("; "))
    }
}

fn main_theorem() -> Outcome {
    let mut details = Vec::new();
    for m in 2..=6 {
        let check = verify_main_theorem(m, m).map_err(|e| e.to_string())?;
        if !check.consistent {
            return Err(format!("2x{m}x{m}: {check:?}"));
        }
        details.push(format!("{m}:{:?}", check.polystable_orbit_dims));
    }
    Ok(format!("polystable orbit dims {}", details.join(" ")))
}

fn dimension_headers() -> Outcome {
    let got: Vec<usize> = (2..=5).map(|n| orbit_dim_diagonal(&vec![1; n])).collect();
    let ghz = stabilizer_dim_diagonal(&[1, 1]);
    if got == [7, 17, 30, 47] && ghz == 2 {
        Ok(format!("orbit dims {got:?}, GHZ stabilizer {ghz}"))
    } else {
        Err(format!("orbit dims {got:?}, GHZ stabilizer {ghz}"))
    }
}

fn kcf_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut rejected = 0;
    let mut wrong = Vec::new();
    for trial in 0..500 {
        let ks = common::random_structure(&mut rng, 6, 0.1);
        let (pencil, g) = common::scramble(&mut rng, &kcf_to_pencil(&ks));
        let expected = moebius_on_kcf(&ks, &g).map_err(|e| e.to_string())?;
        match compute_kcf(&pencil, KCF_TOL) {
            Ok(got) if got.approx_eq(&expected, 1e-8) => {}
            Err(Error::IllConditioned(_)) => rejected += 1,
            Ok(got) => wrong.push(format!("#{trial}: {expected:?} recovered as {got:?}")),
            Err(e) => wrong.push(format!("#{trial}: {e}")),
        }
    }
    if wrong.is_empty() && rejected <= 1 {
        Ok(format!("{}/500 recovered, {rejected} rejected as ill-conditioned", 500 - rejected))
    } else {
        Err(format!("{} wrong, {rejected} rejected: {}", wrong.len(), wrong.join("; ")))
    }
}

fn witness_suite(rows: &[RefRow]) -> Outcome {
    let mut problems = Vec::new();
    let mut null_rows = 0;
    let mut semistable_rows = 0;
    for row in rows {
        let params = &parameter_choices(row.param_count())[0];
        let ks = match row.structure(params) {
            Ok(ks) => ks,
            Err(e) => {
                problems.push(format!("{}: {e}", row.label()));
                continue;
            }
        };
        let result = match row.orbit_type {
            OrbitType::NullCone => {
                null_rows += 1;
                check_null_witness(&ks)
            }
            OrbitType::StrictlySemistable => {
                semistable_rows += 1;
                check_semistable_witness(&ks)
            }
            _ => Ok(()),
        };
        if let Err(e) = result {
            problems.push(format!("{}: {e}", row.label()));
        }
    }

    let mut closures = 0;
    for row in rows.iter().filter(|r| r.closure.is_some()) {
        let target_number = row.closure.unwrap();
        let target = rows.iter().find(|r| (r.m, r.n, r.number) == (row.m, row.n, target_number)).expect("closure target row");
        let params = &parameter_choices(row.param_count())[0];
        match closure_matches(row, target, params, params) {
            Ok(true) => closures += 1,
            Ok(false) => problems.push(format!("{}: limit is not class {target_number}", row.label())),
            Err(e) => problems.push(format!("{}: {e}", row.label())),
        }
        if row.param_count() == 1 {
            // A different parameter value names a different polystable class.
            match closure_matches(row, target, params, &[c(5.0, 0.0)]) {
                Ok(false) => {}
                Ok(true) => problems.push(format!("{}: limit also matches class {target_number} with x = 5", row.label())),
                Err(e) => problems.push(format!("{}: {e}", row.label())),
            }
        }
    }
    if closures != 7 {
        problems.push(format!("{closures} of 7 closure annotations confirmed"));
    }
    if problems.is_empty() {
        Ok(format!("{null_rows} null-cone rows, {semistable_rows} strictly semistable rows, {closures} closure annotations"))
    } else {
        Err(problems.join("; "))
    }
}

fn check_null_witness(ks: &KroneckerStructure) -> Result<(), String> {
    let fam = witness_for(ks).map_err(|e| e.to_string())?;
    let state = representative_state(ks).map_err(|e| e.to_string())?;
    let ratio = norm_ratio(&fam, WITNESS_ALPHA, &state).map_err(|e| e.to_string())?;
    let drift = fam.determinant_drift();
    if ratio < 1e-6 && drift < 1e-6 {
        Ok(())
    } else {
        Err(format!("{} witness: ratio {ratio:.2e}, drift {drift:.2e}", fam.kind.label()))
    }
}

fn check_semistable_witness(ks: &KroneckerStructure) -> Result<(), String> {
    let fam = witness_for(ks).map_err(|e| e.to_string())?;
    let state = representative_state(ks).map_err(|e| e.to_string())?;
    let limit = limit_structure(&fam, WITNESS_ALPHA, &state, KCF_TOL).map_err(|e| e.to_string())?;
    let expected = polystable_limit(ks).map_err(|e| e.to_string())?;
    let drift = fam.determinant_drift();
    // Classes are compared up to the relabeling of eigenvalues by the first party.
    if moebius_equivalent(&limit, &expected, EQUIV_TOL) && drift < 1e-6 {
        Ok(())
    } else {
        Err(format!("{} witness reaches {limit:?}, expected {expected:?}, drift {drift:.2e}", fam.kind.label()))
    }
}

/// Whether the witnessed limit of `row` and its polystable limit both lie in
/// the class of `target`.
fn closure_matches(row: &RefRow, target: &RefRow, params: &[Complex64], target_params: &[Complex64]) -> Result<bool, String> {
    let ks = row.structure(params).map_err(|e| e.to_string())?;
    let target_ks = target.structure(target_params).map_err(|e| e.to_string())?;
    let fam = witness_for(&ks).map_err(|e| e.to_string())?;
    let state = representative_state(&ks).map_err(|e| e.to_string())?;
    let limit_state = evaluate_family(&fam, WITNESS_ALPHA, &state).map_err(|e| e.to_string())?;
    let limit = compute_kcf(&pencil_from_state(&limit_state), KCF_TOL).map_err(|e| e.to_string())?;
    let symbolic = polystable_limit(&ks).map_err(|e| e.to_string())?;
    Ok(moebius_equivalent(&limit, &target_ks, EQUIV_TOL) && moebius_equivalent(&symbolic, &target_ks, EQUIV_TOL))
}

fn balancing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut worst_residual = 0.0f64;
    let mut problems = Vec::new();
    for trial in 0..1000 {
        let mults = common::feasible_mults(&mut rng);
        let vectors: Vec<WeightedVector> = mults.iter().map(|&m| common::random_direction(&mut rng, m)).collect();
        let point = match balance(&vectors, 1e-10) {
            Ok(p) => p,
            Err(e) => {
                problems.push(format!("#{trial} {mults:?}: {e}"));
                continue;
            }
        };
        worst_residual = worst_residual.max(point.residual);
        if point.residual >= 1e-10 {
            problems.push(format!("#{trial}: residual {:.2e}", point.residual));
        }
        match critical_diag_state(&point.vectors, 1e-8) {
            Ok(state) if state.is_critical(1e-8) => {}
            Ok(state) => problems.push(format!("#{trial}: defect {:.2e}", state.criticality_defect())),
            Err(e) => problems.push(format!("#{trial}: {e}")),
        }
    }

    let phi = -0.5 * (-7.0f64 / 8.0).acos();
    let rotated = |sign: f64| Complex64::from_polar(1.0, sign * phi);
    let slice0 = [rotated(1.0), rotated(1.0), rotated(-1.0), rotated(-1.0), c(-1.0, 0.0)];
    let mut entries: Vec<([usize; 3], Complex64)> = (0..5).map(|i| ([0, i, i], slice0[i])).collect();
    entries.extend((0..5).map(|i| ([1, i, i], c(1.0, 0.0))));
    let explicit = StateTensor::from_entries(5, 5, &entries).map_err(|e| e.to_string())?;
    if !explicit.is_critical(1e-8) {
        problems.push(format!("explicit 2x5x5 configuration has defect {:.2e}", explicit.criticality_defect()));
    }
    let class_31 = load_tables().into_iter().find(|r| (r.m, r.n, r.number) == (5, 5, 31)).unwrap();
    let same_class = compute_kcf(&pencil_from_state(&explicit), KCF_TOL)
        .map(|ks| moebius_equivalent(&ks, &class_31.structure(&[]).unwrap(), EQUIV_TOL))
        .unwrap_or(false);
    if !same_class {
        problems.push("explicit 2x5x5 configuration is not in class 31".into());
    }

    if problems.is_empty() {
        Ok(format!("1000 instances, worst residual {worst_residual:.2e}; explicit configuration critical"))
    } else {
        Err(format!("{} problems: {}", problems.len(), problems.join("; ")))
    }
}

fn normal_form_run(state: &StateTensor) -> Result<(OrbitType, Verdict, bool, usize), String> {
    let symbolic = classify_state(state, KCF_TOL).map_err(|e| e.to_string())?.orbit_type;
    let report = normal_form_with(state, &NormalFormOptions::default()).map_err(|e| e.to_string())?;
    let monotone = report.norm_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    Ok((symbolic, report.verdict, monotone, report.iterations))
}

fn normal_form_crosscheck(rows: &[RefRow]) -> Outcome {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let chunk = rows.len().div_ceil(threads);
    let results: Vec<(String, Result<(OrbitType, Verdict, bool, usize), String>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = rows
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|row| {
                            let params = &parameter_choices(row.param_count())[0];
                            (row.label(), normal_form_run(&row.state(params)))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker")).collect()
    });

    let mut problems = Vec::new();
    for (label, result) in &results {
        match result {
            Ok((symbolic, verdict, monotone, _)) => {
                if !verdict.matches(*symbolic) {
                    problems.push(format!("{label}: {verdict:?} for {}", symbolic.label()));
                }
                if !monotone {
                    problems.push(format!("{label}: norm trace increased"));
                }
            }
            Err(e) => problems.push(format!("{label}: {e}")),
        }
    }

    let ghz = StateTensor::from_entries(2, 2, &[([0, 0, 0], c(1.0, 0.0)), ([1, 1, 1], c(1.0, 0.0))]).unwrap();
    match normal_form_with(&ghz, &NormalFormOptions::default()) {
        Ok(report) if report.verdict == Verdict::CriticalReached && report.iterations == 1 && (report.final_ratio() - 1.0).abs() < 1e-12 => {}
        Ok(report) => problems.push(format!("GHZ: {:?} after {} cycles", report.verdict, report.iterations)),
        Err(e) => problems.push(format!("GHZ: {e}")),
    }

    if problems.is_empty() {
        Ok(format!("{} representatives agree, traces monotone, GHZ fixed", results.len()))
    } else {
        Err(format!("{} problems: {}", problems.len(), problems.join("; ")))
    }
}

fn existence_formula() -> Outcome {
    let mut problems = Vec::new();
    for m in 2..=12usize {
        for n in m..=12usize {
            let expected = m == n || m % (n - m) == 0;
            match critical_exists(&[2, m, n]) {
                Ok(got) if got == expected => {}
                Ok(got) => problems.push(format!("(2,{m},{n}): {got}")),
                Err(e) => problems.push(format!("(2,{m},{n}): {e}")),
            }
        }
    }
    let value = critical_exists_value(&[2, 3, 5]).map_err(|e| e.to_string())?;
    if value >= 0 {
        problems.push(format!("(2,3,5) gives {value}"));
    }
    if problems.is_empty() {
        Ok(format!("66 dimension triples agree, (2,3,5) gives {value}"))
    } else {
        Err(problems.join("; "))
    }
}

fn main() -> ExitCode {
    let rows = load_tables();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("golden tables", Box::new(|| golden_tables(&rows))),
        ("representative pipeline", Box::new(|| pipeline(&rows))),
        ("strictly semistable existence", Box::new(semistable_existence)),
        ("main theorem consistency", Box::new(main_theorem)),
        ("dimension headers", Box::new(dimension_headers)),
        ("KCF oracle", Box::new(kcf_oracle)),
        ("witness suite", Box::new(|| witness_suite(&rows))),
        ("balance", Box::new(balancing)),
        ("normal-form crosscheck", Box::new(|| normal_form_crosscheck(&rows))),
        ("existence formula", Box::new(existence_formula)),
    ];
    let mut failed = 0;
    for (number, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}) [{secs:.1} s]", number + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail}) [{secs:.1} s]", number + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
