//! Experiment CSV input: a header naming `x1,x2,y`, then one run per row.

use std::path::Path;

use xcm_bootstrap::model::{Experiment, Region};

use crate::error::{CliError, CliResult};

pub fn read_experiment(path: &Path, region: Region) -> CliResult<Experiment> {
    let parse_err = |message: String| CliError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(format!("missing column {name:?} (expected header x1,x2,y)")))
    };
    let cols = [column("x1")?, column("x2")?, column("y")?];

    let mut points = Vec::new();
    let mut responses = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| parse_err(format!("row {row}: {e}")))?;
        let mut v = [0.0; 3];
        for (slot, (&c, name)) in v.iter_mut().zip(cols.iter().zip(["x1", "x2", "y"])) {
            let field = record.get(c).unwrap_or("");
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| {
                    parse_err(format!(
                        "row {row}: {name} = {field:?} is not a finite number"
                    ))
                })?;
        }
        points.push([v[0], v[1]]);
        responses.push(v[2]);
    }
    Experiment::new(points, responses, region).map_err(CliError::from_core)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn region() -> Region {
        Region::square(1.4).unwrap()
    }

    #[test]
    fn reads_columns_by_name() {
        let mut csv = String::from("y, x2, x1\n");
        for i in 0..6 {
            csv += &format!("{}, {}, {}\n", i, 0.1 * i as f64, -0.1 * i as f64);
        }
        let e = read_experiment(file(&csv).path(), region()).unwrap();
        assert_eq!(e.n(), 6);
        assert_eq!(e.points[2], [-0.2, 0.2]);
        assert_eq!(e.responses[5], 5.0);
    }

    #[test]
    fn bad_cell_names_the_row() {
        let f = file("x1,x2,y\n0,0,1\n1,abc,2\n");
        let err = read_experiment(f.path(), region()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn too_few_rows_is_a_fit_error() {
        let f = file("x1,x2,y\n0,0,1\n1,0,2\n0,1,2\n-1,0,1\n0,-1,1\n");
        let err = read_experiment(f.path(), region()).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("insufficient runs"));
    }

    #[test]
    fn missing_header_column() {
        let f = file("a,b,c\n0,0,1\n");
        assert_eq!(
            read_experiment(f.path(), region()).unwrap_err().exit_code(),
            2
        );
    }
}
