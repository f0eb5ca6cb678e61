//! Plain-text model checkpoints: one header record naming the shape, then
//! every parameter on its own line in [`Model::flat`] order.

use std::io::{BufRead, BufReader, Read, Write};

use super::model::{LinearModel, MlpModel, Model};
use crate::error::{Error, Result};

pub fn write_checkpoint<W: Write>(mut out: W, model: &Model) -> Result<()> {
    match model {
        Model::Linear(m) => writeln!(
            out,
            "linear,{},{},{}",
            m.num_classes(),
            m.input_dim(),
            m.bias.is_some() as u8
        )?,
        Model::Mlp(m) => writeln!(
            out,
            "mlp,{},{},{}",
            m.output_weights.nrows(),
            m.hidden_weights.ncols(),
            m.hidden_dim()
        )?,
    }
    for v in model.flat() {
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<Model> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().ok_or(Error::EmptyInput("checkpoint"))??;
    let fields: Vec<&str> = header.trim().split(',').collect();
    let dims: Vec<usize> = fields
        .iter()
        .skip(1)
        .map(|s| s.parse().map_err(|_| Error::Csv(format!("bad checkpoint header `{header}`"))))
        .collect::<Result<_>>()?;
    let mut model: Model = match (fields.first().copied(), dims.as_slice()) {
        (Some("linear"), &[l, d, b]) => LinearModel::zeros(l, d, b == 1).into(),
        (Some("mlp"), &[l, d, h]) => MlpModel::zeros(l, d, h).into(),
        _ => return Err(Error::Csv(format!("bad checkpoint header `{header}`"))),
    };
    let values: Vec<f64> = lines
        .map(|l| {
            let l = l?;
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::Csv(format!("bad checkpoint value `{l}`")))
        })
        .collect::<Result<_>>()?;
    let expected: usize = model.blocks().iter().map(|(b, _)| b.len()).sum();
    if values.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: values.len(),
        });
    }
    let mut it = values.into_iter();
    for (block, _) in model.blocks_mut() {
        for (p, v) in block.iter_mut().zip(&mut it) {
            *p = v;
        }
    }
    Ok(model)
}
