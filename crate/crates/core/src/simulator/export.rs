//! CSV exports of traces and checkpoint series.

use std::io::Write;

use super::{Checkpoint, Configuration};
use crate::model::{EventSet, GsmpModel};

/// Writes one row per configuration: step, dwell, state, occurring events
/// (space separated) and one valuation column per event (empty for `⊥`).
pub fn write_trace_csv<W: Write>(
    out: W,
    model: &GsmpModel,
    rows: &[(u64, EventSet, Configuration)],
) -> csv::Result<()> {
    let mut w = TraceWriter::new(out, model)?;
    for (step, occurring, cfg) in rows {
        w.record(*step, *occurring, cfg)?;
    }
    w.flush()
}

pub struct TraceWriter<'m, W: Write> {
    model: &'m GsmpModel,
    inner: csv::Writer<W>,
}

impl<'m, W: Write> TraceWriter<'m, W> {
    pub fn new(out: W, model: &'m GsmpModel) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        let mut header = vec![
            "step".to_string(),
            "dwell".to_string(),
            "state".to_string(),
            "occurring".to_string(),
        ];
        header.extend(model.events().iter().map(|e| e.name.clone()));
        inner.write_record(&header)?;
        Ok(TraceWriter { model, inner })
    }

    pub fn record(&mut self, step: u64, occurring: EventSet, cfg: &Configuration) -> csv::Result<()> {
        let mut row = vec![
            step.to_string(),
            cfg.last_step.to_string(),
            self.model.state_name(cfg.state).to_string(),
            occurring
                .iter()
                .map(|e| self.model.event_name(e))
                .collect::<Vec<_>>()
                .join(" "),
        ];
        row.extend(
            cfg.valuation
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
        );
        self.inner.write_record(&row)
    }

    pub fn flush(&mut self) -> csv::Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_checkpoints_csv<W: Write>(out: W, checkpoints: &[Checkpoint]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in checkpoints {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;
    use crate::model::{EventId, StateId};

    #[test]
    fn trace_columns() {
        let m = library::get_model("regions-demo").unwrap().model;
        let cfg = Configuration::with_values(&m, StateId(0), &[(EventId(0), 0.25), (EventId(1), 0.5)]);
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &m, &[(1, EventSet::singleton(EventId(0)), cfg)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "step,dwell,state,occurring,e,f\n1,0,S,e,0.25,0.5\n");
    }

    #[test]
    fn checkpoint_columns() {
        let mut buf = Vec::new();
        write_checkpoints_csv(
            &mut buf,
            &[Checkpoint {
                step: 2,
                partial_d: 0.5,
                partial_c: 0.25,
            }],
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,partial_d,partial_c\n2,0.5,0.25\n");
    }
}
