//! Episode table schema and Parquet encoding.

use std::sync::Arc;

use arrow_array::builder::{FixedSizeListBuilder, Float32Builder};
use arrow_array::{Array, ArrayRef, FixedSizeListArray, Float32Array, Float64Array, RecordBatch, UInt32Array, UInt64Array};
use arrow_schema::{DataType, Field, Schema, SchemaRef};
use parquet::arrow::arrow_reader::ParquetRecordBatchReaderBuilder;
use parquet::arrow::ArrowWriter;
use parquet::file::properties::WriterProperties;

use super::vectors::{ACTION_DIM, OBSERVATION_DIM};

pub const COL_TIMESTAMP: &str = "timestamp";
pub const COL_FRAME_INDEX: &str = "frame_index";
pub const COL_EPISODE_INDEX: &str = "episode_index";
pub const COL_INDEX: &str = "index";
pub const COL_TASK_INDEX: &str = "task_index";
pub const COL_STATE: &str = "observation.state";
pub const COL_ACTION: &str = "action";

/// One exported row.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub timestamp: f64,
    pub frame_index: u32,
    pub episode_index: u32,
    pub index: u64,
    pub task_index: u32,
    pub state: [f32; OBSERVATION_DIM],
    pub action: [f32; ACTION_DIM],
}

fn list_item() -> Arc<Field> {
    Arc::new(Field::new("item", DataType::Float32, true))
}

pub fn episode_schema() -> SchemaRef {
    Arc::new(Schema::new(vec![
        Field::new(COL_TIMESTAMP, DataType::Float64, false),
        Field::new(COL_FRAME_INDEX, DataType::UInt32, false),
        Field::new(COL_EPISODE_INDEX, DataType::UInt32, false),
        Field::new(COL_INDEX, DataType::UInt64, false),
        Field::new(COL_TASK_INDEX, DataType::UInt32, false),
        Field::new(COL_STATE, DataType::FixedSizeList(list_item(), OBSERVATION_DIM as i32), false),
        Field::new(COL_ACTION, DataType::FixedSizeList(list_item(), ACTION_DIM as i32), false),
    ]))
}

fn fixed_list<const N: usize>(rows: impl Iterator<Item = [f32; N]>) -> ArrayRef {
    let mut b = FixedSizeListBuilder::new(Float32Builder::new(), N as i32).with_field(list_item());
    for r in rows {
        b.values().append_slice(&r);
        b.append(true);
    }
    Arc::new(b.finish())
}

pub fn rows_to_batch(rows: &[EpisodeRow]) -> Result<RecordBatch, String> {
    let columns: Vec<ArrayRef> = vec![
        Arc::new(Float64Array::from_iter_values(rows.iter().map(|r| r.timestamp))),
        Arc::new(UInt32Array::from_iter_values(rows.iter().map(|r| r.frame_index))),
        Arc::new(UInt32Array::from_iter_values(rows.iter().map(|r| r.episode_index))),
        Arc::new(UInt64Array::from_iter_values(rows.iter().map(|r| r.index))),
        Arc::new(UInt32Array::from_iter_values(rows.iter().map(|r| r.task_index))),
        fixed_list(rows.iter().map(|r| r.state)),
        fixed_list(rows.iter().map(|r| r.action)),
    ];
    RecordBatch::try_new(episode_schema(), columns).map_err(|e| e.to_string())
}

pub fn encode_parquet(rows: &[EpisodeRow]) -> Result<Vec<u8>, String> {
    let batch = rows_to_batch(rows)?;
    let props = WriterProperties::builder().set_created_by("teleop recorder".into()).build();
    let mut out = Vec::new();
    let mut w = ArrowWriter::try_new(&mut out, batch.schema(), Some(props)).map_err(|e| e.to_string())?;
    w.write(&batch).map_err(|e| e.to_string())?;
    w.close().map_err(|e| e.to_string())?;
    Ok(out)
}

/// A decoded episode file. Columns that do not match the expected schema are
/// reported in `schema_errors` rather than failing the whole read.
#[derive(Debug, Default)]
pub struct DecodedTable {
    pub rows: Vec<EpisodeRow>,
    pub schema_errors: Vec<String>,
}

fn column<'a, T: 'static>(batch: &'a RecordBatch, name: &str, errors: &mut Vec<String>) -> Option<&'a T> {
    let Some(col) = batch.column_by_name(name) else {
        errors.push(format!("missing column `{name}`"));
        return None;
    };
    let typed = col.as_any().downcast_ref::<T>();
    if typed.is_none() {
        errors.push(format!("column `{name}` has type {}", col.data_type()));
    }
    typed
}

fn list_values<const N: usize>(
    batch: &RecordBatch,
    name: &str,
    errors: &mut Vec<String>,
) -> Option<Vec<[f32; N]>> {
    let list: &FixedSizeListArray = column(batch, name, errors)?;
    if list.value_length() != N as i32 {
        errors.push(format!("column `{name}` has width {}, expected {N}", list.value_length()));
        return None;
    }
    let Some(values) = list.values().as_any().downcast_ref::<Float32Array>() else {
        errors.push(format!("column `{name}` items are {}, expected float32", list.value_type()));
        return None;
    };
    if list.null_count() > 0 || values.null_count() > 0 {
        errors.push(format!("column `{name}` contains nulls"));
    }
    let v = values.values();
    Some((0..list.len()).map(|i| v[i * N..(i + 1) * N].try_into().unwrap()).collect())
}

pub fn decode_parquet(file: std::fs::File) -> Result<DecodedTable, String> {
    let reader = ParquetRecordBatchReaderBuilder::try_new(file).map_err(|e| e.to_string())?.build().map_err(|e| e.to_string())?;
    let mut out = DecodedTable::default();
    for batch in reader {
        let batch = batch.map_err(|e| e.to_string())?;
        let errors = &mut out.schema_errors;
        let ts: Option<&Float64Array> = column(&batch, COL_TIMESTAMP, errors);
        let fi: Option<&UInt32Array> = column(&batch, COL_FRAME_INDEX, errors);
        let ei: Option<&UInt32Array> = column(&batch, COL_EPISODE_INDEX, errors);
        let ix: Option<&UInt64Array> = column(&batch, COL_INDEX, errors);
        let ti: Option<&UInt32Array> = column(&batch, COL_TASK_INDEX, errors);
        let st = list_values::<OBSERVATION_DIM>(&batch, COL_STATE, errors);
        let ac = list_values::<ACTION_DIM>(&batch, COL_ACTION, errors);
        let (Some(ts), Some(fi), Some(ei), Some(ix), Some(ti), Some(st), Some(ac)) = (ts, fi, ei, ix, ti, st, ac) else {
            break;
        };
        for i in 0..batch.num_rows() {
            out.rows.push(EpisodeRow {
                timestamp: ts.value(i),
                frame_index: fi.value(i),
                episode_index: ei.value(i),
                index: ix.value(i),
                task_index: ti.value(i),
                state: st[i],
                action: ac[i],
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: u32) -> Vec<EpisodeRow> {
        (0..n)
            .map(|i| EpisodeRow {
                timestamp: i as f64 * 0.05,
                frame_index: i,
                episode_index: 2,
                index: 100 + i as u64,
                task_index: 0,
                state: std::array::from_fn(|k| (i as usize * 13 + k) as f32),
                action: std::array::from_fn(|k| -(k as f32) * 0.5),
            })
            .collect()
    }

    #[test]
    fn parquet_round_trip_and_determinism() {
        let r = rows(40);
        let bytes = encode_parquet(&r).unwrap();
        assert_eq!(bytes, encode_parquet(&r).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.parquet");
        std::fs::write(&p, &bytes).unwrap();
        let t = decode_parquet(std::fs::File::open(&p).unwrap()).unwrap();
        assert!(t.schema_errors.is_empty(), "{:?}", t.schema_errors);
        assert_eq!(t.rows, r);
    }

    #[test]
    fn schema_shape() {
        let s = episode_schema();
        let DataType::FixedSizeList(_, n) = s.field_with_name(COL_STATE).unwrap().data_type() else { panic!() };
        assert_eq!(*n, 13);
        let DataType::FixedSizeList(_, n) = s.field_with_name(COL_ACTION).unwrap().data_type() else { panic!() };
        assert_eq!(*n, 7);
    }
}
