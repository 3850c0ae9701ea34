//! Text checkpoint for [`DirectionModel`].
//!
//! ```text
//! greed-direction-checkpoint 1
//! node_count <n>
//! input_dim <K>
//! hidden_dims <h1,h2,...>        (empty after the key for none)
//! embed_dim <N>
//! margin <f>
//! threshold <f>
//! learning_rate <f>
//! batch_size <b>
//! epochs <e>
//! rng_seed <s>
//! reference_seed <s|->
//! epochs_trained <e>
//! id_map <path|->
//! reference <N floats>
//! frame <N-3>
//! <N floats>                     (one line per frame vector)
//! inputs <n> <K>
//! <K floats>                     (one line per node)
//! layer <i> <rows> <cols>
//! <cols floats>                  (one line per row)
//! end
//! ```
//!
//! Floats carry 17 significant digits and parse back bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DirectionModel, Layer, ModelConfig, ModelError};
use crate::crossprod::ConstantFrame;

pub const CHECKPOINT_MAGIC: &str = "greed-direction-checkpoint";
const VERSION: u32 = 1;

/// A loaded checkpoint and the id map it references, if any.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: DirectionModel,
    pub id_map: Option<String>,
}

fn floats(out: &mut impl Write, values: &[f64]) -> std::io::Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            out.write_all(b" ")?;
        }
        write!(out, "{v:.16e}")?;
        first = false;
    }
    writeln!(out)
}

pub fn save_checkpoint(
    model: &DirectionModel,
    id_map: Option<&str>,
    path: impl AsRef<Path>,
) -> Result<(), ModelError> {
    let path = path.as_ref();
    let io = |source| ModelError::Io {
        path: path.to_owned(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let c = &model.config;
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{CHECKPOINT_MAGIC} {VERSION}")?;
        writeln!(out, "node_count {}", model.node_count)?;
        writeln!(out, "input_dim {}", c.input_dim)?;
        let hidden: Vec<String> = c.hidden_dims.iter().map(usize::to_string).collect();
        writeln!(out, "hidden_dims {}", hidden.join(","))?;
        writeln!(out, "embed_dim {}", c.embed_dim)?;
        writeln!(out, "margin {:.16e}", c.margin)?;
        writeln!(out, "threshold {:.16e}", c.threshold)?;
        writeln!(out, "learning_rate {:.16e}", c.learning_rate)?;
        writeln!(out, "batch_size {}", c.batch_size)?;
        writeln!(out, "epochs {}", c.epochs)?;
        writeln!(out, "rng_seed {}", c.rng_seed)?;
        match c.reference_seed {
            Some(s) => writeln!(out, "reference_seed {s}")?,
            None => writeln!(out, "reference_seed -")?,
        }
        writeln!(out, "epochs_trained {}", model.epochs_trained)?;
        writeln!(out, "id_map {}", id_map.unwrap_or("-"))?;
        write!(out, "reference ")?;
        floats(&mut out, &model.reference)?;
        writeln!(out, "frame {}", model.frame.vectors().len())?;
        for v in model.frame.vectors() {
            floats(&mut out, v)?;
        }
        writeln!(out, "inputs {} {}", model.node_count, c.input_dim)?;
        if c.input_dim > 0 {
            for row in model.inputs.chunks_exact(c.input_dim) {
                floats(&mut out, row)?;
            }
        }
        for (i, layer) in model.layers.iter().enumerate() {
            writeln!(out, "layer {i} {} {}", layer.rows, layer.cols)?;
            for row in layer.weights.chunks_exact(layer.cols) {
                floats(&mut out, row)?;
            }
        }
        writeln!(out, "end")?;
        out.flush()
    };
    write().map_err(io)
}

struct Reader<'p> {
    path: &'p Path,
    lines: std::iter::Enumerate<std::io::Lines<BufReader<File>>>,
    line: usize,
}

impl<'p> Reader<'p> {
    fn err(&self, message: impl Into<String>) -> ModelError {
        ModelError::Malformed {
            path: self.path.to_owned(),
            line: self.line,
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<String, ModelError> {
        match self.lines.next() {
            Some((i, Ok(l))) => {
                self.line = i + 1;
                Ok(l)
            }
            Some((_, Err(source))) => Err(ModelError::Io {
                path: self.path.to_owned(),
                source,
            }),
            None => Err(self.err("unexpected end of file")),
        }
    }

    /// Reads `key value...` and returns the remainder after the key.
    fn keyed(&mut self, key: &str) -> Result<String, ModelError> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.trim().to_owned()),
            None if line.trim() == key => Ok(String::new()),
            _ => Err(self.err(format!("expected '{key}', found '{line}'"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T, ModelError> {
        s.parse()
            .map_err(|_| self.err(format!("cannot parse '{s}'")))
    }

    fn keyed_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ModelError> {
        let v = self.keyed(key)?;
        self.parse(&v)
    }

    fn floats(&self, s: &str, expected: usize) -> Result<Vec<f64>, ModelError> {
        let v = s
            .split_whitespace()
            .map(|t| self.parse::<f64>(t))
            .collect::<Result<Vec<_>, _>>()?;
        if v.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(self.err("non-finite value"));
        }
        Ok(v)
    }

    fn float_rows(&mut self, rows: usize, cols: usize) -> Result<Vec<f64>, ModelError> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next_line()?;
            data.extend(self.floats(&line, cols)?);
        }
        Ok(data)
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, ModelError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| ModelError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut r = Reader {
        path,
        lines: BufReader::new(file).lines().enumerate(),
        line: 0,
    };
    let version: u32 = r.keyed_parse(CHECKPOINT_MAGIC)?;
    if version != VERSION {
        return Err(r.err(format!("unsupported checkpoint version {version}")));
    }
    let node_count: usize = r.keyed_parse("node_count")?;
    let input_dim = r.keyed_parse("input_dim")?;
    let hidden = r.keyed("hidden_dims")?;
    let hidden_dims = hidden
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| r.parse(s))
        .collect::<Result<Vec<usize>, _>>()?;
    let embed_dim: usize = r.keyed_parse("embed_dim")?;
    let margin = r.keyed_parse("margin")?;
    let threshold = r.keyed_parse("threshold")?;
    let learning_rate = r.keyed_parse("learning_rate")?;
    let batch_size = r.keyed_parse("batch_size")?;
    let epochs = r.keyed_parse("epochs")?;
    let rng_seed = r.keyed_parse("rng_seed")?;
    let reference_seed = match r.keyed("reference_seed")?.as_str() {
        "-" => None,
        s => Some(r.parse(s)?),
    };
    let epochs_trained = r.keyed_parse("epochs_trained")?;
    let id_map = match r.keyed("id_map")?.as_str() {
        "-" => None,
        s => Some(s.to_owned()),
    };
    let config = ModelConfig {
        input_dim,
        hidden_dims,
        embed_dim,
        margin,
        threshold,
        learning_rate,
        batch_size,
        epochs,
        rng_seed,
        reference_seed,
    };
    let reference = {
        let line = r.keyed("reference")?;
        r.floats(&line, embed_dim)?
    };
    let frame_count: usize = r.keyed_parse("frame")?;
    let frame_data = r.float_rows(frame_count, embed_dim)?;
    let frame_vectors = frame_data
        .chunks(embed_dim.max(1))
        .map(<[f64]>::to_vec)
        .collect();
    let frame = ConstantFrame::from_vectors(embed_dim, frame_vectors)?;
    let shape = r.keyed("inputs")?;
    let dims: Vec<usize> = shape
        .split_whitespace()
        .map(|s| r.parse(s))
        .collect::<Result<_, _>>()?;
    if dims != [node_count, input_dim] {
        return Err(r.err("input table shape disagrees with header"));
    }
    let inputs = r.float_rows(node_count, input_dim)?;
    let mut layers = Vec::new();
    for i in 0..=config.hidden_dims.len() {
        let spec = r.keyed("layer")?;
        let dims: Vec<usize> = spec
            .split_whitespace()
            .map(|s| r.parse(s))
            .collect::<Result<_, _>>()?;
        let [idx, rows, cols] = dims[..] else {
            return Err(r.err("expected 'layer <index> <rows> <cols>'"));
        };
        if idx != i {
            return Err(r.err(format!("expected layer {i}, found {idx}")));
        }
        let weights = r.float_rows(rows, cols)?;
        layers.push(Layer {
            rows,
            cols,
            weights,
        });
    }
    r.keyed("end")?;
    let model = DirectionModel::from_parts(
        config,
        node_count,
        inputs,
        layers,
        reference,
        frame,
        epochs_trained,
    )
    .map_err(|e| r.err(e.to_string()))?;
    Ok(Checkpoint { model, id_map })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LabeledPair;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        for embed_dim in [3, 5] {
            let mut model = DirectionModel::new(
                5,
                ModelConfig {
                    input_dim: 4,
                    hidden_dims: vec![6, 3],
                    embed_dim,
                    reference_seed: Some(9),
                    ..Default::default()
                },
            )
            .unwrap();
            model
                .train_epochs(&[LabeledPair::pos(0, 1), LabeledPair::neg(1, 0)], 2)
                .unwrap();
            let path = dir.path().join(format!("m{embed_dim}.ckpt"));
            save_checkpoint(&model, Some("out/id_map.txt"), &path).unwrap();
            let back = load_checkpoint(&path).unwrap();
            assert_eq!(back.model, model);
            assert_eq!(back.id_map.as_deref(), Some("out/id_map.txt"));
        }
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let model = DirectionModel::new(
            2,
            ModelConfig {
                input_dim: 2,
                hidden_dims: vec![],
                ..Default::default()
            },
        )
        .unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model, None, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cut: String = text.lines().take(18).collect::<Vec<_>>().join("\n");
        std::fs::write(&path, cut).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(ModelError::Malformed { .. })
        ));
    }
}
