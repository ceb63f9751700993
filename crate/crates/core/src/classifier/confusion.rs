use std::fmt::Write as _;
use std::ops::Add;

use super::{ClassifierError, EmotionLabel};

const K: usize = EmotionLabel::ALL.len();

/// Counts of true label (rows) against recognized label (columns).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    counts: [[u64; K]; K],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts(counts: [[u64; K]; K]) -> Self {
        Self { counts }
    }

    pub fn labels(&self) -> [EmotionLabel; K] {
        EmotionLabel::ALL
    }

    pub fn record(&mut self, truth: EmotionLabel, recognized: EmotionLabel) {
        self.counts[truth.index()][recognized.index()] += 1;
    }

    pub fn counts(&self) -> &[[u64; K]; K] {
        &self.counts
    }

    pub fn count(&self, truth: EmotionLabel, recognized: EmotionLabel) -> u64 {
        self.counts[truth.index()][recognized.index()]
    }

    pub fn row_sum(&self, truth: EmotionLabel) -> u64 {
        self.counts[truth.index()].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..K).map(|i| self.counts[i][i]).sum()
    }

    /// Row percentages, each cell `round(100 * count / row_sum)` with halves
    /// rounded away from zero.
    pub fn percentage_view(&self) -> Result<[[u64; K]; K], ClassifierError> {
        let mut out = [[0; K]; K];
        for (label, (row, counts)) in EmotionLabel::ALL.into_iter().zip(out.iter_mut().zip(&self.counts)) {
            let n: u64 = counts.iter().sum();
            if n == 0 {
                return Err(ClassifierError::EmptyRow(label));
            }
            for (cell, &c) in row.iter_mut().zip(counts) {
                // exact integer form of floor(100 c / n + 1/2)
                *cell = (200 * c + n) / (2 * n);
            }
        }
        Ok(out)
    }

    pub fn accuracy(&self) -> Result<f64, ClassifierError> {
        match self.total() {
            0 => Err(ClassifierError::EmptyMatrix),
            n => Ok(self.trace() as f64 / n as f64),
        }
    }

    /// Per-label recall; `None` for labels with no test utterances.
    pub fn recall(&self) -> [Option<f64>; K] {
        let mut out = [None; K];
        for (i, r) in out.iter_mut().enumerate() {
            let n: u64 = self.counts[i].iter().sum();
            if n > 0 {
                *r = Some(self.counts[i][i] as f64 / n as f64);
            }
        }
        out
    }

    /// Machine-readable counts: header of recognized labels, one row per true label.
    pub fn to_counts_csv(&self) -> String {
        let mut s = String::from("stimulation");
        for l in EmotionLabel::ALL {
            s.push(',');
            s.push_str(l.as_str());
        }
        s.push('\n');
        for l in EmotionLabel::ALL {
            s.push_str(l.as_str());
            for c in &self.counts[l.index()] {
                write!(s, ",{c}").expect("write to String");
            }
            s.push('\n');
        }
        s
    }

    /// Percentage table with stimulation rows and recognized columns, followed
    /// by overall and per-label accuracy. Rows without utterances print `-`.
    pub fn to_report(&self, title: &str, rejected: usize) -> String {
        const W: usize = 11;
        let mut s = String::new();
        writeln!(s, "{title}").unwrap();
        writeln!(s, "utterances: {}  rejected: {rejected}", self.total()).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "{:<W$}  Recognized Emotions (%)", "Stimulation").unwrap();
        write!(s, "{:<W$}", "").unwrap();
        for l in EmotionLabel::ALL {
            write!(s, "{:>W$}", l.as_str()).unwrap();
        }
        writeln!(s).unwrap();
        for l in EmotionLabel::ALL {
            write!(s, "{:<W$}", l.as_str()).unwrap();
            let row = &self.counts[l.index()];
            let n: u64 = row.iter().sum();
            for &c in row {
                if n == 0 {
                    write!(s, "{:>W$}", "-").unwrap();
                } else {
                    write!(s, "{:>W$}", (200 * c + n) / (2 * n)).unwrap();
                }
            }
            writeln!(s).unwrap();
        }
        writeln!(s).unwrap();
        match self.accuracy() {
            Ok(a) => writeln!(s, "overall accuracy: {a:.4}").unwrap(),
            Err(_) => writeln!(s, "overall accuracy: -").unwrap(),
        }
        for (l, r) in EmotionLabel::ALL.into_iter().zip(self.recall()) {
            match r {
                Some(r) => writeln!(s, "accuracy {:<10} {r:.4}", l.as_str()).unwrap(),
                None => writeln!(s, "accuracy {:<10} -", l.as_str()).unwrap(),
            }
        }
        s
    }
}

impl Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(mut self, rhs: ConfusionMatrix) -> ConfusionMatrix {
        for (a, b) in self.counts.iter_mut().flatten().zip(rhs.counts.iter().flatten()) {
            *a += b;
        }
        self
    }
}
