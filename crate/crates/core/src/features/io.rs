use std::io::Write;
use std::path::Path;

use super::{pre_motion_names, FeatureRow, HMM_NAMES, POST_MOTION_NAMES};
use crate::error::{Error, Result};
use crate::tracking::PlayKey;

const ID_COLUMNS: [&str; 5] = ["gameId", "playId", "offense", "defense", "label"];

/// Write the feature matrix: id columns, label, then every feature. The HMM
/// columns are written only when every row carries them. `comment` becomes a
/// leading `#` line.
pub fn write_feature_csv(path: impl AsRef<Path>, rows: &[FeatureRow], comment: Option<&str>) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    if let Some(c) = comment {
        writeln!(file, "# {c}")?;
    }
    let with_hmm = !rows.is_empty() && rows.iter().all(|r| r.hmm.is_some());
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<String> = ID_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(pre_motion_names());
    header.extend(POST_MOTION_NAMES.iter().map(|s| s.to_string()));
    if with_hmm {
        header.extend(HMM_NAMES.iter().map(|s| s.to_string()));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.key.game_id.clone(),
            r.key.play_id.clone(),
            r.offense.clone(),
            r.defense.clone(),
            r.label.map_or("NA".to_string(), |l| l.to_string()),
        ];
        rec.extend(r.pre_motion.iter().map(f64::to_string));
        rec.extend(r.post_motion_naive.iter().map(f64::to_string));
        if with_hmm {
            rec.extend(r.hmm.as_ref().into_iter().flatten().map(f64::to_string));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureRow>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| {
        find(name).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let ids: Vec<usize> = ID_COLUMNS.iter().map(|n| need(n)).collect::<Result<_>>()?;
    let pre: Vec<usize> = pre_motion_names().iter().map(|n| need(n)).collect::<Result<_>>()?;
    let post: Vec<usize> = POST_MOTION_NAMES.iter().map(|n| need(n)).collect::<Result<_>>()?;
    let hmm: Option<Vec<usize>> = HMM_NAMES.iter().map(|n| find(n)).collect();

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("column `{}` is not numeric: {s:?}", &headers[i]),
            })
        };
        let label = match rec.get(ids[4]).unwrap_or("").trim() {
            "1" => Some(1),
            "0" => Some(0),
            "" | "NA" => None,
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("label must be 0, 1 or NA, got {other:?}"),
                })
            }
        };
        out.push(FeatureRow {
            key: PlayKey::new(&rec[ids[0]], &rec[ids[1]]),
            offense: rec[ids[2]].to_string(),
            defense: rec[ids[3]].to_string(),
            label,
            pre_motion: pre.iter().map(|&i| num(i)).collect::<Result<_>>()?,
            post_motion_naive: post.iter().map(|&i| num(i)).collect::<Result<_>>()?,
            hmm: match &hmm {
                Some(cols) => Some(cols.iter().map(|&i| num(i)).collect::<Result<_>>()?),
                None => None,
            },
        });
    }
    Ok(out)
}
