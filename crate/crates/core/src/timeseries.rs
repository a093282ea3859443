//! Per-segment time-series export as CSV or a self-contained SVG plot.
//!
//! Output is a pure function of the input values, so repeated exports are
//! byte-identical.

use std::fmt::Write as _;

use crate::bundled::Figure1Series;
use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::pipeline::AnalysisTable;

pub const Y_MIN: f64 = -1.2;
pub const Y_MAX: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Svg,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "svg" => Ok(ExportFormat::Svg),
            _ => Err(Error::input(format!(
                "unknown export format {s:?}; expected csv or svg"
            ))),
        }
    }
}

/// Channels aligned on a shared segment index.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    pub length: usize,
    /// Segment id per index, when the frame comes from a table.
    pub labels: Option<Vec<String>>,
    pub columns: Vec<(Channel, Vec<Option<f64>>)>,
}

/// Parses channel names; unknown names are input errors.
pub fn parse_channels<S: AsRef<str>>(names: &[S]) -> Result<Vec<Channel>> {
    names.iter().map(|n| n.as_ref().parse()).collect()
}

impl TimeSeriesFrame {
    pub fn from_figure1(fig: &Figure1Series, channels: &[Channel]) -> Result<Self> {
        let columns = channels
            .iter()
            .map(|&ch| {
                fig.dense(ch)
                    .map(|v| (ch, v))
                    .ok_or_else(|| Error::input(format!("channel {ch} is not part of the figure series")))
            })
            .collect::<Result<_>>()?;
        Ok(TimeSeriesFrame {
            length: fig.length,
            labels: None,
            columns,
        })
    }

    /// Index `i` is the `i`-th row of the table in start-time order.
    pub fn from_table(table: &AnalysisTable, channels: &[Channel]) -> Self {
        TimeSeriesFrame {
            length: table.len(),
            labels: Some(table.rows().iter().map(|r| r.segment_id.clone()).collect()),
            columns: channels.iter().map(|&ch| (ch, table.column(ch))).collect(),
        }
    }

    pub fn column(&self, channel: Channel) -> Option<&[Option<f64>]> {
        self.columns
            .iter()
            .find(|(c, _)| *c == channel)
            .map(|(_, v)| v.as_slice())
    }

    pub fn export(&self, format: ExportFormat) -> String {
        match format {
            ExportFormat::Csv => self.to_csv(),
            ExportFormat::Svg => self.to_svg(),
        }
    }

    /// `index[,segment_id],<channel>...`; absent values are empty cells.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["index".to_string()];
        if self.labels.is_some() {
            header.push("segment_id".into());
        }
        header.extend(self.columns.iter().map(|(c, _)| c.name().to_string()));
        w.write_record(&header).expect("in-memory write");
        for i in 0..self.length {
            let mut row = vec![i.to_string()];
            if let Some(labels) = &self.labels {
                row.push(labels[i].clone());
            }
            for (_, values) in &self.columns {
                row.push(values[i].map(|v| v.to_string()).unwrap_or_default());
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn to_svg(&self) -> String {
        SvgPlot::new(self.length).render(self)
    }
}

fn style(ch: Channel) -> (&'static str, &'static str) {
    // (stroke colour, dash pattern)
    match ch {
        Channel::GeminiValence => ("#008080", ""),
        Channel::GeminiArousal => ("#d2691e", ""),
        Channel::E2vArousal => ("#0000ff", "6 4"),
        Channel::E2vValence => ("#808000", "6 4"),
        Channel::Pathos => ("#8f00ff", ""),
    }
}

struct SvgPlot {
    width: f64,
    height: f64,
    left: f64,
    right: f64,
    top: f64,
    bottom: f64,
    x_max: f64,
}

impl SvgPlot {
    fn new(length: usize) -> Self {
        SvgPlot {
            width: 900.0,
            height: 380.0,
            left: 60.0,
            right: 20.0,
            top: 20.0,
            bottom: 90.0,
            x_max: (length + 1) as f64,
        }
    }

    fn x(&self, i: f64) -> f64 {
        self.left + i / self.x_max * (self.width - self.left - self.right)
    }

    fn y(&self, v: f64) -> f64 {
        let h = self.height - self.top - self.bottom;
        self.top + (Y_MAX - v) / (Y_MAX - Y_MIN) * h
    }

    fn render(&self, frame: &TimeSeriesFrame) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
            w = self.width,
            h = self.height
        );
        let _ = writeln!(
            s,
            r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#,
            self.width, self.height
        );
        let (x0, x1) = (self.x(0.0), self.x(self.x_max));
        let (y0, y1) = (self.y(Y_MIN), self.y(Y_MAX));

        for tick in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let y = self.y(tick);
            let _ = writeln!(
                s,
                r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#cccccc" stroke-dasharray="1 3"/>"##
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{tick:.1}</text>"#,
                x0 - 6.0,
                y + 4.0
            );
        }
        let mut tick = 0;
        while (tick as f64) <= self.x_max {
            let x = self.x(tick as f64);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{y1:.2}" x2="{x:.2}" y2="{y0:.2}" stroke="#cccccc" stroke-dasharray="1 3"/>"##
            );
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{tick}</text>"#,
                y0 + 16.0
            );
            tick += 10;
        }
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Segment index</text>"#,
            (x0 + x1) / 2.0,
            y0 + 34.0
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">Score</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0
        );

        for (ch, values) in &frame.columns {
            let (colour, dash) = style(*ch);
            let _ = writeln!(s, r#"<g class="{}">"#, ch.name());
            if ch.is_discrete() {
                for (i, v) in values.iter().enumerate() {
                    if let Some(v) = v {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{colour}"/>"#,
                            self.x(i as f64),
                            self.y(*v)
                        );
                    }
                }
            } else {
                for run in runs(values) {
                    let pts: Vec<String> = run
                        .iter()
                        .map(|&(i, v)| format!("{:.2},{:.2}", self.x(i as f64), self.y(v)))
                        .collect();
                    let dash_attr = if dash.is_empty() {
                        String::new()
                    } else {
                        format!(r#" stroke-dasharray="{dash}""#)
                    };
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"{dash_attr}/>"#,
                        pts.join(" ")
                    );
                }
            }
            let _ = writeln!(s, "</g>");
        }

        // legend below the axis
        let n = frame.columns.len().max(1) as f64;
        let slot = (x1 - x0) / n;
        let ly = y0 + 60.0;
        for (k, (ch, _)) in frame.columns.iter().enumerate() {
            let (colour, dash) = style(*ch);
            let lx = x0 + slot * k as f64 + 10.0;
            if ch.is_discrete() {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{ly:.2}" r="4" fill="{colour}"/>"#,
                    lx + 12.0
                );
            } else {
                let dash_attr = if dash.is_empty() {
                    String::new()
                } else {
                    format!(r#" stroke-dasharray="{dash}""#)
                };
                let _ = writeln!(
                    s,
                    r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="1.5"{dash_attr}/>"#,
                    lx + 24.0
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + 30.0,
                ly + 4.0,
                ch.label()
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Maximal runs of consecutive present values.
fn runs(values: &[Option<f64>]) -> Vec<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for (i, v) in values.iter().enumerate() {
        match v {
            Some(v) => cur.push((i, *v)),
            None if !cur.is_empty() => out.push(std::mem::take(&mut cur)),
            None => {}
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}
