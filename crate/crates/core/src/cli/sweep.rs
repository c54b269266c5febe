use rayon::prelude::*;
use serde_json::{json, Value};

use super::{run_with_table, Cell, CliError, Command, CommandOutput, RunOptions, Scenario, Table};

/// Sets the value at a dotted path, creating intermediate objects.
fn set_path(root: &mut Value, path: &str, v: Value) -> Result<(), CliError> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| CliError::Config(format!("sweep axis '{path}' crosses a non-object")))?;
        if i + 1 == parts.len() {
            obj.insert(p.to_string(), v);
            return Ok(());
        }
        cur = obj.entry(p.to_string()).or_insert_with(|| json!({}));
    }
    Err(CliError::Config("empty sweep axis".into()))
}

fn points(axes: &[(String, Vec<Value>)]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for (_, vals) in axes {
        out = out.into_iter().flat_map(|p| (0..vals.len()).map(move |k| [p.clone(), vec![k]].concat())).collect();
    }
    out
}

fn label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn cell(v: &Value) -> Cell {
    match v {
        Value::Number(n) if n.is_i64() => Cell::Int(n.as_i64().unwrap_or_default()),
        Value::Number(n) => Cell::Num(n.as_f64().unwrap_or(f64::NAN)),
        other => Cell::Text(label(other)),
    }
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect()
}

pub(super) fn run_sweep(s: &Scenario, opts: &RunOptions) -> Result<CommandOutput, CliError> {
    let spec = s.sweep.as_ref().ok_or_else(|| CliError::Config("sweep needs a sweep block".into()))?;
    let command: Command = spec.command.parse()?;
    if command == Command::Sweep {
        return Err(CliError::Config("nested sweeps are not supported".into()));
    }
    if spec.axes.iter().any(|(_, v)| v.is_empty()) {
        return Err(CliError::Config("every sweep axis needs at least one value".into()));
    }
    let mut base = serde_json::to_value(s).map_err(|e| CliError::Io(e.to_string()))?;
    base.as_object_mut().map(|o| o.remove("sweep"));

    let pts = points(&spec.axes);
    let mut scenarios = Vec::with_capacity(pts.len());
    for p in &pts {
        let mut v = base.clone();
        for ((path, vals), &k) in spec.axes.iter().zip(p) {
            set_path(&mut v, path, vals[k].clone())?;
        }
        let sc: Scenario = serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?;
        sc.check()?;
        scenarios.push(sc);
    }

    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs.max(1)).build().map_err(|e| CliError::Config(e.to_string()))?;
    let results: Vec<(i32, Option<Table>)> = pool.install(|| {
        scenarios
            .par_iter()
            .zip(&pts)
            .map(|(sc, p)| {
                let name: Vec<String> =
                    spec.axes.iter().zip(p).map(|((path, vals), &k)| format!("{}={}", slug(path), slug(&label(&vals[k])))).collect();
                let sub = RunOptions { out: opts.out.join(name.join("__")), ..opts.clone() };
                run_with_table(command, sc, &sub)
            })
            .collect()
    });

    // one row per point: the last row of that point's own table
    let extra: Vec<String> = results.iter().find_map(|(_, t)| t.as_ref()).map(|t| t.columns.clone()).unwrap_or_default();
    // command columns already present as axes are dropped
    let keep: Vec<usize> = (0..extra.len()).filter(|&j| !spec.axes.iter().any(|(p, _)| *p == extra[j])).collect();
    let mut columns: Vec<&str> = vec!["index"];
    columns.extend(spec.axes.iter().map(|(p, _)| p.as_str()));
    columns.extend(["status", "exit_code"]);
    columns.extend(keep.iter().map(|&j| extra[j].as_str()));
    let mut table = Table::new(&columns);
    let mut records = Vec::new();
    for (i, (p, (code, sub))) in pts.iter().zip(&results).enumerate() {
        let mut row: Vec<Cell> = vec![i.into()];
        row.extend(spec.axes.iter().zip(p).map(|((_, vals), &k)| cell(&vals[k])));
        let status = match code {
            0 => "ok",
            4 => "indeterminate",
            _ => "failed",
        };
        row.extend([status.into(), Cell::Int(*code as i64)]);
        let last = sub.as_ref().filter(|t| t.columns == extra).and_then(|t| t.rows.last());
        match last {
            Some(r) => row.extend(keep.iter().map(|&j| r[j].clone())),
            None => row.extend(keep.iter().map(|_| Cell::Text(String::new()))),
        }
        table.push(row);
        records.push(json!({ "index": i, "exit_code": code }));
    }
    let indeterminate = results.iter().any(|(c, _)| *c == 4);
    Ok(CommandOutput { json: json!({ "command": command.name(), "points": records }), table, indeterminate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_product_order() {
        let axes = vec![("a".into(), vec![json!(1), json!(2)]), ("b.c".into(), vec![json!("x"), json!("y"), json!("z")])];
        let p = points(&axes);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 0]);
        assert_eq!(p[1], vec![0, 1]);
        assert_eq!(p[5], vec![1, 2]);
    }

    #[test]
    fn dotted_paths_create_objects() {
        let mut v = json!({ "a": 1 });
        set_path(&mut v, "b.c", json!(2.5)).unwrap();
        assert_eq!(v["b"]["c"], json!(2.5));
        assert!(set_path(&mut v, "a.d", json!(0)).is_err());
    }
}
