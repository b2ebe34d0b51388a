use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{run_throughput, Strategy, ThroughputReport};
use crate::loader::{LoaderConfig, LoaderError, RowSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    BatchRows,
    FetchBlockRows,
    BufferCapacityRows,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::BatchRows => "batch_rows",
            SweepParameter::FetchBlockRows => "fetch_block_rows",
            SweepParameter::BufferCapacityRows => "buffer_capacity_rows",
        }
    }

    pub fn apply(self, base: &LoaderConfig, value: u64) -> LoaderConfig {
        let mut c = *base;
        match self {
            SweepParameter::BatchRows => c.batch_rows = value,
            SweepParameter::FetchBlockRows => c.fetch_block_rows = value,
            SweepParameter::BufferCapacityRows => c.buffer_capacity_rows = value,
        }
        c
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "batch_rows" => Ok(SweepParameter::BatchRows),
            "fetch_block_rows" => Ok(SweepParameter::FetchBlockRows),
            "buffer_capacity_rows" => Ok(SweepParameter::BufferCapacityRows),
            _ => Err(format!(
                "unknown sweep parameter `{s}` (batch_rows|fetch_block_rows|buffer_capacity_rows)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkippedPoint {
    pub value: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub rows: Vec<(u64, ThroughputReport)>,
    pub skipped: Vec<SkippedPoint>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["parameter", "value"];
        header.extend(ThroughputReport::CSV_HEADER);
        w.write_record(&header).unwrap();
        for (value, report) in &self.rows {
            let mut rec = vec![self.parameter.name().to_string(), value.to_string()];
            rec.extend(report.csv_fields());
            w.write_record(&rec).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// One throughput run per value of `parameter`, everything else taken from
/// `fixed`. Invalid grid points are skipped and listed; I/O errors abort.
pub fn sweep(
    source: Arc<dyn RowSource>,
    parameter: SweepParameter,
    values: &[u64],
    fixed: &LoaderConfig,
    epochs: u64,
    warmup: u64,
    strategy: Strategy,
) -> Result<SweepTable, LoaderError> {
    if values.is_empty() {
        return Err(LoaderError::InvalidConfig("sweep needs at least one value".into()));
    }
    let mut table = SweepTable {
        parameter,
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    for &v in values {
        let config = parameter.apply(fixed, v);
        if let Err(e) = config.validate() {
            table.skipped.push(SkippedPoint { value: v, reason: e.to_string() });
            continue;
        }
        let report = run_throughput(source.clone(), &config, epochs, warmup, strategy)?;
        table.rows.push((v, report));
    }
    Ok(table)
}
