//! Text and JSON file formats. Indices are 1-based in every file.
//!
//! Text formats (`pmx`, `dmx`, `fac`, DIMACS, `eoks`) accept blank lines and
//! comment lines starting with `#` (or `c` for the DIMACS-style formats).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use hardcomplete_core::gadgets::{
    Assignment, GramConstraintSystem, Label, Literal, OneInKSatInstance, PartitionInstance,
    PartitionSplit, Reduction, VectorAssignment,
};
use hardcomplete_core::graph::{Coloring, Graph};
use hardcomplete_core::matrix::{DenseMatrix, Factorization, PartialMatrix};
use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Non-comment lines with their 1-based line numbers.
fn content_lines<'a>(
    text: &'a str,
    comment: &'a [&'a str],
) -> impl Iterator<Item = (usize, &'a str)> + 'a {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(move |(_, l)| {
            !l.is_empty()
                && !comment
                    .iter()
                    .any(|c| *l == *c || l.starts_with(&format!("{c} ")))
        })
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| anyhow!("line {line}: invalid {what} `{tok}`"))
}

fn header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    magic: &[&str],
    fields: usize,
) -> Result<(usize, Vec<&'a str>)> {
    let (line, text) = lines
        .next()
        .ok_or_else(|| anyhow!("missing `{}` header", magic.join(" ")))?;
    let toks: Vec<&str> = text.split_whitespace().collect();
    ensure!(
        toks.len() == magic.len() + fields && toks[..magic.len()] == *magic,
        "line {line}: expected `{} ...` header with {fields} fields, got `{text}`",
        magic.join(" ")
    );
    Ok((line, toks[magic.len()..].to_vec()))
}

fn provenance_lines(prefix: &str, provenance: &[String]) -> String {
    provenance
        .iter()
        .map(|p| format!("{prefix} {p}\n"))
        .collect()
}

// Partial matrices: `pmx n c |Omega|`, then canonical entries `i j value`.

pub fn parse_pmx(text: &str) -> Result<PartialMatrix> {
    let mut lines = content_lines(text, &["#"]);
    let (hl, h) = header(&mut lines, &["pmx"], 3)?;
    let n: usize = parse_num(h[0], hl, "dimension")?;
    let c: f64 = parse_num(h[1], hl, "coefficient bound")?;
    let count: usize = parse_num(h[2], hl, "entry count")?;
    let mut pm = PartialMatrix::new(n, c).map_err(|e| anyhow!("line {hl}: {e}"))?;
    let mut seen = 0;
    for (line, text) in lines {
        let toks: Vec<&str> = text.split_whitespace().collect();
        ensure!(
            toks.len() == 3,
            "line {line}: expected `i j value`, got `{text}`"
        );
        let i: usize = parse_num(toks[0], line, "row")?;
        let j: usize = parse_num(toks[1], line, "column")?;
        let v: f64 = parse_num(toks[2], line, "value")?;
        ensure!(
            i >= 1 && j >= 1 && i <= n && j <= n,
            "line {line}: index ({i}, {j}) outside 1..={n}"
        );
        ensure!(
            i <= j,
            "line {line}: entries must be canonical (i <= j), got ({i}, {j})"
        );
        pm.reveal(i - 1, j - 1, v)
            .map_err(|e| anyhow!("line {line}: {e}"))?;
        seen += 1;
    }
    ensure!(
        seen == count,
        "header declares {count} entries, found {seen}"
    );
    Ok(pm)
}

pub fn write_pmx(pm: &PartialMatrix, provenance: &[String]) -> String {
    let mut out = provenance_lines("#", provenance);
    let _ = writeln!(
        out,
        "pmx {} {} {}",
        pm.n(),
        pm.coeff_bound(),
        pm.canonical_count()
    );
    for (i, j, v) in pm.canonical_entries() {
        let _ = writeln!(out, "{} {} {v:?}", i + 1, j + 1);
    }
    out
}

// Dense matrices: `dmx rows cols`, then row-major values.

fn parse_values(lines: impl Iterator<Item = (usize, String)>, expected: usize) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(expected);
    for (line, text) in lines {
        for tok in text.split_whitespace() {
            values.push(parse_num(tok, line, "value")?);
        }
    }
    ensure!(
        values.len() == expected,
        "expected {expected} values, found {}",
        values.len()
    );
    Ok(values)
}

pub fn parse_dmx(text: &str) -> Result<DenseMatrix> {
    let mut lines = content_lines(text, &["#"]);
    let (hl, h) = header(&mut lines, &["dmx"], 2)?;
    let rows: usize = parse_num(h[0], hl, "row count")?;
    let cols: usize = parse_num(h[1], hl, "column count")?;
    let values = parse_values(lines.map(|(l, t)| (l, t.to_string())), rows * cols)?;
    Ok(DenseMatrix::from_row_slice(rows, cols, &values)?)
}

fn write_rows(out: &mut String, m: &DMatrix<f64>) {
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

pub fn write_dmx(m: &DenseMatrix, provenance: &[String]) -> String {
    let mut out = provenance_lines("#", provenance);
    let _ = writeln!(out, "dmx {} {}", m.nrows(), m.ncols());
    write_rows(&mut out, m.as_matrix());
    out
}

// Factorizations: `fac n r`, then n rows of U, then n rows of V.

pub fn parse_fac(text: &str) -> Result<Factorization> {
    let mut lines = content_lines(text, &["#"]);
    let (hl, h) = header(&mut lines, &["fac"], 2)?;
    let n: usize = parse_num(h[0], hl, "row count")?;
    let r: usize = parse_num(h[1], hl, "dimension")?;
    let values = parse_values(lines.map(|(l, t)| (l, t.to_string())), 2 * n * r)?;
    let u = DMatrix::from_row_slice(n, r, &values[..n * r]);
    let v = DMatrix::from_row_slice(n, r, &values[n * r..]);
    Ok(Factorization::new(u, v)?)
}

pub fn write_fac(f: &Factorization, provenance: &[String]) -> Result<String> {
    ensure!(
        f.u().nrows() == f.v().nrows(),
        "fac stores square factorizations only"
    );
    let mut out = provenance_lines("#", provenance);
    let _ = writeln!(out, "fac {} {}", f.u().nrows(), f.dim());
    write_rows(&mut out, f.u());
    write_rows(&mut out, f.v());
    Ok(out)
}

// Graphs: DIMACS `p edge n m` and `e i j` lines.

pub fn parse_dimacs(text: &str) -> Result<Graph> {
    let mut n = None;
    let mut declared = 0;
    let mut edges = Vec::new();
    for (line, text) in content_lines(text, &["c"]) {
        let toks: Vec<&str> = text.split_whitespace().collect();
        match toks[0] {
            "p" => {
                ensure!(n.is_none(), "line {line}: second problem line");
                ensure!(
                    toks.len() == 4 && (toks[1] == "edge" || toks[1] == "col"),
                    "line {line}: expected `p edge n m`"
                );
                n = Some(parse_num::<usize>(toks[2], line, "vertex count")?);
                declared = parse_num(toks[3], line, "edge count")?;
            }
            "e" => {
                let nv = n.ok_or_else(|| anyhow!("line {line}: edge before `p edge` line"))?;
                ensure!(toks.len() == 3, "line {line}: expected `e i j`");
                let a: usize = parse_num(toks[1], line, "vertex")?;
                let b: usize = parse_num(toks[2], line, "vertex")?;
                ensure!(
                    a >= 1 && b >= 1 && a <= nv && b <= nv,
                    "line {line}: edge {a}-{b} has a vertex outside 1..={nv}"
                );
                ensure!(a != b, "line {line}: self-loop on vertex {a}");
                edges.push((a - 1, b - 1));
            }
            other => bail!("line {line}: unknown record `{other}`"),
        }
    }
    let n = n.ok_or_else(|| anyhow!("missing `p edge n m` line"))?;
    let g = Graph::new(n, edges)?;
    ensure!(
        g.edge_count() == declared,
        "problem line declares {declared} edges, found {} distinct",
        g.edge_count()
    );
    Ok(g)
}

pub fn write_dimacs(g: &Graph, provenance: &[String]) -> String {
    let mut out = provenance_lines("c", provenance);
    let _ = writeln!(out, "p edge {} {}", g.n(), g.edge_count());
    for (a, b) in g.edges() {
        let _ = writeln!(out, "e {} {}", a + 1, b + 1);
    }
    out
}

// Colorings: `{"k": int, "colors": [int, ...]}` with colors in 1..=k.

#[derive(Serialize, Deserialize)]
struct ColoringFile {
    k: usize,
    colors: Vec<usize>,
}

pub fn parse_coloring(text: &str) -> Result<Coloring> {
    let file: ColoringFile = serde_json::from_str(text).context("coloring JSON")?;
    if let Some((v, &c)) = file
        .colors
        .iter()
        .enumerate()
        .find(|(_, &c)| c == 0 || c > file.k)
    {
        bail!("vertex {}: color {c} outside 1..={}", v + 1, file.k);
    }
    Ok(Coloring::new(
        file.k,
        file.colors.iter().map(|c| c - 1).collect(),
    )?)
}

pub fn coloring_json(f: &Coloring) -> Value {
    json!({ "k": f.k(), "colors": f.colors().iter().map(|c| c + 1).collect::<Vec<_>>() })
}

// Partition instances: a JSON array of weights, each a number or a
// `"p/q"` string.

pub fn parse_weight(v: &Value, index: usize) -> Result<Ratio<i128>> {
    match v {
        Value::String(s) => {
            let r: Ratio<i128> = s
                .trim()
                .parse()
                .map_err(|_| anyhow!("weight {}: invalid fraction `{s}`", index + 1))?;
            Ok(r)
        }
        Value::Number(num) => {
            if let Some(i) = num.as_i64() {
                return Ok(Ratio::from_integer(i as i128));
            }
            let f = num
                .as_f64()
                .ok_or_else(|| anyhow!("weight {}: not a number", index + 1))?;
            Ratio::approximate_float(f)
                .ok_or_else(|| anyhow!("weight {}: {f} has no rational form", index + 1))
        }
        other => bail!(
            "weight {}: expected number or \"p/q\" string, got {other}",
            index + 1
        ),
    }
}

pub fn parse_partition(text: &str) -> Result<PartitionInstance> {
    let value: Value = serde_json::from_str(text).context("partition JSON")?;
    let items = match &value {
        Value::Array(a) => a,
        Value::Object(o) => o
            .get("weights")
            .and_then(Value::as_array)
            .ok_or_else(|| anyhow!("expected a `weights` array"))?,
        _ => bail!("expected a JSON array of weights"),
    };
    let weights = items
        .iter()
        .enumerate()
        .map(|(i, w)| parse_weight(w, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(PartitionInstance::from_ratios(weights)?)
}

fn ratio_string(r: &Ratio<i128>) -> String {
    r.to_string()
}

pub fn partition_json(inst: &PartitionInstance) -> Value {
    Value::Array(
        inst.weights()
            .iter()
            .map(|w| Value::String(ratio_string(w)))
            .collect(),
    )
}

pub fn split_json(split: &PartitionSplit) -> Value {
    json!(split.in_set.iter().map(|i| i + 1).collect::<Vec<_>>())
}

// Exact-one-in-k instances: `p eoks k n m`, then one clause per line as
// signed 1-based variables, optionally terminated by `0`.

pub fn parse_eoks(text: &str) -> Result<OneInKSatInstance> {
    let mut lines = content_lines(text, &["c"]);
    let (hl, h) = header(&mut lines, &["p", "eoks"], 3)?;
    let k: usize = parse_num(h[0], hl, "clause width")?;
    let n: usize = parse_num(h[1], hl, "variable count")?;
    let m: usize = parse_num(h[2], hl, "clause count")?;
    let mut clauses = Vec::with_capacity(m);
    for (line, text) in lines {
        let mut lits: Vec<i64> = text
            .split_whitespace()
            .map(|t| parse_num(t, line, "literal"))
            .collect::<Result<_>>()?;
        if lits.last() == Some(&0) {
            lits.pop();
        }
        ensure!(
            lits.len() == k,
            "line {line}: clause has {} literals, expected {k}",
            lits.len()
        );
        let clause = lits
            .iter()
            .map(|&l| {
                ensure!(l != 0, "line {line}: literal 0 inside a clause");
                Ok(Literal {
                    var: l.unsigned_abs() as usize,
                    positive: l > 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        clauses.push(clause);
    }
    ensure!(
        clauses.len() == m,
        "header declares {m} clauses, found {}",
        clauses.len()
    );
    Ok(OneInKSatInstance::new(k, n, clauses)?)
}

fn literal_int(l: &Literal) -> i64 {
    if l.positive {
        l.var as i64
    } else {
        -(l.var as i64)
    }
}

pub fn write_eoks(inst: &OneInKSatInstance, provenance: &[String]) -> String {
    let mut out = provenance_lines("c", provenance);
    let _ = writeln!(
        out,
        "p eoks {} {} {}",
        inst.k(),
        inst.n_vars(),
        inst.clauses().len()
    );
    for clause in inst.clauses() {
        let lits: Vec<String> = clause.iter().map(|l| literal_int(l).to_string()).collect();
        let _ = writeln!(out, "{} 0", lits.join(" "));
    }
    out
}

pub fn assignment_json(f: &Assignment) -> Value {
    json!(f.values)
}

// Gram-constraint systems.

fn reduction_json(r: &Reduction) -> Value {
    match r {
        Reduction::Partition(inst) => {
            json!({ "kind": "partition", "params": { "weights": partition_json(inst) } })
        }
        Reduction::OneInKSat(inst) => json!({
            "kind": "csp",
            "params": {
                "k": inst.k(),
                "n_vars": inst.n_vars(),
                "clauses": inst.clauses().iter().map(|c| c.iter().map(literal_int).collect::<Vec<_>>()).collect::<Vec<_>>(),
            }
        }),
        Reduction::Amplified { copies, base } => json!({
            "kind": "amplified",
            "params": { "copies": copies, "base": reduction_json(base) }
        }),
        Reduction::Custom => json!({ "kind": "custom", "params": {} }),
    }
}

fn reduction_from_json(kind: &str, params: &Value) -> Result<Reduction> {
    match kind {
        "partition" => {
            let text = params
                .get("weights")
                .ok_or_else(|| anyhow!("partition params need `weights`"))?
                .to_string();
            Ok(Reduction::Partition(parse_partition(&text)?))
        }
        "csp" => {
            let field = |name: &str| {
                params
                    .get(name)
                    .ok_or_else(|| anyhow!("csp params need `{name}`"))
            };
            let k = field("k")?
                .as_u64()
                .ok_or_else(|| anyhow!("`k` must be an integer"))? as usize;
            let n = field("n_vars")?
                .as_u64()
                .ok_or_else(|| anyhow!("`n_vars` must be an integer"))?
                as usize;
            let clauses: Vec<Vec<i64>> =
                serde_json::from_value(field("clauses")?.clone()).context("csp clauses")?;
            let clauses = clauses
                .into_iter()
                .map(|c| {
                    c.into_iter()
                        .map(|l| Literal {
                            var: l.unsigned_abs() as usize,
                            positive: l > 0,
                        })
                        .collect()
                })
                .collect();
            Ok(Reduction::OneInKSat(OneInKSatInstance::new(k, n, clauses)?))
        }
        "amplified" => {
            let copies = params
                .get("copies")
                .and_then(Value::as_u64)
                .ok_or_else(|| anyhow!("amplified params need `copies`"))?;
            let base = params
                .get("base")
                .ok_or_else(|| anyhow!("amplified params need `base`"))?;
            let base_kind = base
                .get("kind")
                .and_then(Value::as_str)
                .ok_or_else(|| anyhow!("base needs `kind`"))?;
            let base = reduction_from_json(base_kind, base.get("params").unwrap_or(&Value::Null))?;
            Ok(Reduction::Amplified {
                copies: copies as usize,
                base: Box::new(base),
            })
        }
        "custom" => Ok(Reduction::Custom),
        other => bail!("unknown system kind `{other}`"),
    }
}

pub fn system_json(sys: &GramConstraintSystem, provenance: &[String]) -> Value {
    let r = reduction_json(sys.reduction());
    let labels = sys.labels();
    let constraints: Vec<Value> = sys
        .constraints()
        .iter()
        .map(|c| json!([labels[c.a].to_string(), labels[c.b].to_string(), c.target]))
        .collect();
    json!({
        "kind": r["kind"],
        "params": r["params"],
        "labels": labels.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "constraints": constraints,
        "provenance": provenance,
    })
}

pub fn parse_system(text: &str) -> Result<GramConstraintSystem> {
    let v: Value = serde_json::from_str(text).context("Gram system JSON")?;
    let kind = v
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| anyhow!("missing `kind`"))?;
    let reduction = reduction_from_json(kind, v.get("params").unwrap_or(&Value::Null))?;
    let label_strs: Vec<String> =
        serde_json::from_value(v.get("labels").cloned().unwrap_or(Value::Null))
            .context("`labels`")?;
    let labels = hardcomplete_core::gadgets::parse_labels(label_strs.iter().map(String::as_str))?;
    let mut sys = GramConstraintSystem::new(labels, reduction)?;
    let constraints: Vec<(String, String, f64)> =
        serde_json::from_value(v.get("constraints").cloned().unwrap_or(Value::Null))
            .context("`constraints`")?;
    for (i, (a, b, t)) in constraints.iter().enumerate() {
        let (la, lb): (Label, Label) = (a.parse()?, b.parse()?);
        sys.push(&la, &lb, *t)
            .with_context(|| format!("constraint {}", i + 1))?;
    }
    Ok(sys)
}

// Vector assignments: `{"dim": d, "vectors": {"label": [..], ...}}`.

#[derive(Serialize, Deserialize)]
struct VectorsFile {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

pub fn vectors_json(va: &VectorAssignment) -> Value {
    let vectors: BTreeMap<String, Vec<f64>> = va
        .iter()
        .map(|(l, v)| (l.to_string(), v.iter().copied().collect()))
        .collect();
    serde_json::to_value(VectorsFile {
        dim: va.dim(),
        vectors,
    })
    .expect("plain data serializes")
}

pub fn parse_vectors(text: &str) -> Result<VectorAssignment> {
    let file: VectorsFile = serde_json::from_str(text).context("vector assignment JSON")?;
    let mut va = VectorAssignment::new(file.dim);
    for (label, v) in file.vectors {
        let l: Label = label.parse()?;
        va.insert(l, DVector::from_vec(v))
            .with_context(|| format!("vector `{label}`"))?;
    }
    Ok(va)
}
