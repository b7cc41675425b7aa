//! Translation from chromosomes to cycle-accurate stimuli.
//!
//! A stimulus is one input bit-vector per clock cycle, packed little-endian
//! into `ceil(width/8)` bytes per cycle. Raw-bits mode chunks the chromosome
//! directly; transaction mode decodes it as a sequence of opcode-selected
//! transactions, each spanning a fixed number of cycles. Both zero-pad the
//! tail and mask bits above the DUT's input width.

use std::fs;
use std::path::Path;

use crate::corpus::Chromosome;
use crate::{Error, Result};

/// One fixed-shape transaction an opcode byte can select.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransactionTemplate {
    pub name: String,
    pub payload_bytes: usize,
    pub cycles: usize,
}

/// Opcode-indexed list of transaction templates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateTable {
    templates: Vec<TransactionTemplate>,
}

impl TemplateTable {
    pub fn new(templates: Vec<TransactionTemplate>) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::Config("template table must not be empty".into()));
        }
        if templates.len() > 256 {
            return Err(Error::Config(format!(
                "template table has {} entries; one opcode byte addresses at most 256",
                templates.len()
            )));
        }
        for (i, t) in templates.iter().enumerate() {
            if t.name.is_empty() {
                return Err(Error::Config(format!("template {i} has an empty name")));
            }
            if t.cycles == 0 {
                return Err(Error::Config(format!(
                    "template '{}' must span at least one cycle",
                    t.name
                )));
            }
            if t.cycles > u16::MAX as usize {
                return Err(Error::Config(format!(
                    "template '{}' spans {} cycles; limit is {}",
                    t.name,
                    t.cycles,
                    u16::MAX
                )));
            }
        }
        Ok(TemplateTable { templates })
    }

    /// Parses the tab-separated table format: one line per template,
    /// `opcode-index<TAB>name<TAB>payload-bytes<TAB>cycles`, `#` comments.
    /// Indices must form exactly `0..n`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let fail = |reason: String| Error::TemplateTable {
            file: path.to_path_buf(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
        let mut rows: Vec<(usize, TransactionTemplate)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(fail(format!(
                    "line {}: expected 4 tab-separated fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let index: usize = fields[0].parse().map_err(|_| {
                fail(format!(
                    "line {}: bad opcode index '{}'",
                    lineno + 1,
                    fields[0]
                ))
            })?;
            let payload_bytes: usize = fields[2].parse().map_err(|_| {
                fail(format!(
                    "line {}: bad payload-bytes '{}'",
                    lineno + 1,
                    fields[2]
                ))
            })?;
            let cycles: usize = fields[3]
                .parse()
                .map_err(|_| fail(format!("line {}: bad cycles '{}'", lineno + 1, fields[3])))?;
            rows.push((
                index,
                TransactionTemplate {
                    name: fields[1].to_string(),
                    payload_bytes,
                    cycles,
                },
            ));
        }
        rows.sort_by_key(|(i, _)| *i);
        for (expect, (got, _)) in rows.iter().enumerate() {
            if *got != expect {
                return Err(fail(format!(
                    "opcode indices must cover 0..{} exactly; problem at index {}",
                    rows.len(),
                    got
                )));
            }
        }
        let templates = rows.into_iter().map(|(_, t)| t).collect();
        TemplateTable::new(templates).map_err(|e| fail(e.to_string()))
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn get(&self, index: usize) -> &TransactionTemplate {
        &self.templates[index]
    }
}

/// How chromosomes map onto DUT input cycles.
#[derive(Clone, Debug)]
pub enum GrammarMode {
    RawBits,
    Transaction(TemplateTable),
}

impl GrammarMode {
    pub fn label(&self) -> &'static str {
        match self {
            GrammarMode::RawBits => "raw-bits",
            GrammarMode::Transaction(_) => "transaction",
        }
    }
}

/// A translated input: `cycle_count * bytes_per_cycle` bytes of per-cycle
/// bit-vectors, plus the transaction layout when one exists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stimulus {
    width_bits: u32,
    bytes_per_cycle: usize,
    data: Vec<u8>,
    /// `(template index, cycles)` per decoded transaction; empty in raw mode.
    tx_spans: Vec<(u16, u16)>,
    pub source_chromosome_id: u64,
}

impl Stimulus {
    pub fn width_bits(&self) -> u32 {
        self.width_bits
    }

    pub fn bytes_per_cycle(&self) -> usize {
        self.bytes_per_cycle
    }

    pub fn cycle_count(&self) -> u64 {
        (self.data.len() / self.bytes_per_cycle) as u64
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn tx_spans(&self) -> &[(u16, u16)] {
        &self.tx_spans
    }

    pub fn cycles(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks_exact(self.bytes_per_cycle)
    }
}

pub fn bytes_per_cycle(width_bits: u32) -> usize {
    (width_bits as usize + 7) / 8
}

/// Zeroes the bits of a packed cycle above `width_bits`.
fn mask_cycle(cycle: &mut [u8], width_bits: u32) {
    let rem = width_bits % 8;
    if rem != 0 {
        if let Some(last) = cycle.last_mut() {
            *last &= (1u8 << rem) - 1;
        }
    }
}

/// Maps a chromosome to a stimulus under the given grammar.
pub fn translate(chromosome: &Chromosome, width_bits: u32, mode: &GrammarMode) -> Stimulus {
    assert!(width_bits >= 1, "DUT input width must be >= 1 bit");
    let bpc = bytes_per_cycle(width_bits);
    let (data, tx_spans) = match mode {
        GrammarMode::RawBits => (pack_raw(&chromosome.bytes, width_bits, bpc), Vec::new()),
        GrammarMode::Transaction(table) => {
            pack_transactions(&chromosome.bytes, width_bits, bpc, table)
        }
    };
    Stimulus {
        width_bits,
        bytes_per_cycle: bpc,
        data,
        tx_spans,
        source_chromosome_id: chromosome.id,
    }
}

fn pack_raw(bytes: &[u8], width_bits: u32, bpc: usize) -> Vec<u8> {
    let cycles = bytes.len().div_ceil(bpc);
    let mut data = bytes.to_vec();
    data.resize(cycles * bpc, 0);
    for cycle in data.chunks_exact_mut(bpc) {
        mask_cycle(cycle, width_bits);
    }
    data
}

fn pack_transactions(
    bytes: &[u8],
    width_bits: u32,
    bpc: usize,
    table: &TemplateTable,
) -> (Vec<u8>, Vec<(u16, u16)>) {
    let mut data = Vec::new();
    let mut spans = Vec::new();
    let mut cursor = 0usize;
    while cursor < bytes.len() {
        let index = bytes[cursor] as usize % table.len();
        cursor += 1;
        let template = table.get(index);
        // The transaction buffer starts with the canonical opcode index, then
        // the payload (zero-padded if the chromosome ran out), zero-extended
        // to fill the template's cycles. Payload past that capacity is
        // dropped.
        let mut buffer = vec![0u8; template.cycles * bpc];
        buffer[0] = index as u8;
        let available = bytes
            .len()
            .saturating_sub(cursor)
            .min(template.payload_bytes);
        let room = buffer.len() - 1;
        let copied = available.min(room);
        buffer[1..1 + copied].copy_from_slice(&bytes[cursor..cursor + copied]);
        cursor += template.payload_bytes.min(bytes.len() - cursor);
        for cycle in buffer.chunks_exact_mut(bpc) {
            mask_cycle(cycle, width_bits);
        }
        data.extend_from_slice(&buffer);
        spans.push((index as u16, template.cycles as u16));
    }
    (data, spans)
}

/// Human-readable stimulus listing: a header, decoded transactions when the
/// grammar has them, then one hex line per cycle.
pub fn decode_report(stimulus: &Stimulus, mode: &GrammarMode) -> String {
    let mut out = format!(
        "cycles={} width={} bytes_per_cycle={}\n",
        stimulus.cycle_count(),
        stimulus.width_bits(),
        stimulus.bytes_per_cycle()
    );
    if let GrammarMode::Transaction(table) = mode {
        for (k, &(index, cycles)) in stimulus.tx_spans().iter().enumerate() {
            out.push_str(&format!(
                "txn {k:>4}  {}  cycles={cycles}\n",
                table.get(index as usize).name
            ));
        }
    }
    for (i, cycle) in stimulus.cycles().enumerate() {
        let hex: Vec<String> = cycle.iter().map(|b| format!("{b:02x}")).collect();
        out.push_str(&format!("{i:>6}  {}\n", hex.join(" ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chrom(bytes: &[u8]) -> Chromosome {
        Chromosome::initial(0, bytes.to_vec())
    }

    fn demo_table() -> TemplateTable {
        TemplateTable::new(vec![
            TransactionTemplate {
                name: "nop".into(),
                payload_bytes: 0,
                cycles: 1,
            },
            TransactionTemplate {
                name: "write".into(),
                payload_bytes: 2,
                cycles: 2,
            },
            TransactionTemplate {
                name: "burst".into(),
                payload_bytes: 1,
                cycles: 3,
            },
        ])
        .unwrap()
    }

    #[test]
    fn wide_bus_packs_and_masks() {
        // 165-bit bus: 21 bytes per cycle, 5 live bits in the last byte.
        let bytes = vec![0xFFu8; 42];
        let s = translate(&chrom(&bytes), 165, &GrammarMode::RawBits);
        assert_eq!(s.bytes_per_cycle(), 21);
        assert_eq!(s.cycle_count(), 2);
        for cycle in s.cycles() {
            assert_eq!(cycle[19], 0xFF);
            assert_eq!(cycle[20], 0x1F);
        }
    }

    #[test]
    fn partial_tail_cycle_is_zero_padded() {
        let bytes = vec![0xAAu8; 25];
        let s = translate(&chrom(&bytes), 165, &GrammarMode::RawBits);
        assert_eq!(s.cycle_count(), 2);
        let last: Vec<u8> = s.cycles().nth(1).unwrap().to_vec();
        assert_eq!(&last[..4], &[0xAA; 4]);
        assert!(last[4..].iter().all(|&b| b == 0));
    }

    #[test]
    fn byte_wide_bus_is_identity() {
        let bytes = vec![1u8, 2, 3, 250];
        let s = translate(&chrom(&bytes), 8, &GrammarMode::RawBits);
        assert_eq!(s.cycle_count(), 4);
        assert_eq!(s.data(), &bytes[..]);
    }

    #[test]
    fn empty_chromosome_yields_zero_cycles() {
        let s = translate(&chrom(&[]), 64, &GrammarMode::RawBits);
        assert_eq!(s.cycle_count(), 0);
        assert_eq!(s.cycles().count(), 0);
        let t = translate(&chrom(&[]), 16, &GrammarMode::Transaction(demo_table()));
        assert_eq!(t.cycle_count(), 0);
    }

    #[test]
    fn opcode_selects_template_modulo_table_len() {
        let mode = GrammarMode::Transaction(demo_table());
        let s = translate(&chrom(&[0x00]), 16, &mode);
        assert_eq!(s.tx_spans(), &[(0, 1)]);
        assert_eq!(s.data(), &[0, 0]);

        // 0x04 % 3 == 1: "write", and the emitted opcode byte is the
        // canonical index, not the raw chromosome byte.
        let s = translate(&chrom(&[0x04, 0xAA, 0xBB]), 16, &mode);
        assert_eq!(s.tx_spans(), &[(1, 2)]);
        assert_eq!(s.data(), &[0x01, 0xAA, 0xBB, 0x00]);
    }

    #[test]
    fn missing_payload_is_zero_padded() {
        let mode = GrammarMode::Transaction(demo_table());
        let s = translate(&chrom(&[0x01]), 16, &mode);
        assert_eq!(s.tx_spans(), &[(1, 2)]);
        assert_eq!(s.data(), &[0x01, 0x00, 0x00, 0x00]);
    }

    #[test]
    fn transactions_concatenate_in_order() {
        let mode = GrammarMode::Transaction(demo_table());
        let s = translate(&chrom(&[0x02, 0xFF, 0x00]), 16, &mode);
        assert_eq!(s.tx_spans(), &[(2, 3), (0, 1)]);
        assert_eq!(s.cycle_count(), 4);
        assert_eq!(s.data(), &[0x02, 0xFF, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn transaction_cycles_are_masked_to_width() {
        let table = TemplateTable::new(vec![TransactionTemplate {
            name: "w".into(),
            payload_bytes: 1,
            cycles: 1,
        }])
        .unwrap();
        let s = translate(&chrom(&[0x00, 0xFF]), 12, &GrammarMode::Transaction(table));
        assert_eq!(s.data(), &[0x00, 0x0F]);
    }

    #[test]
    fn template_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.tsv");
        std::fs::write(
            &path,
            "# demo table\n0\tnop\t0\t1\n2\tburst\t1\t3\n1\twrite\t2\t2\n",
        )
        .unwrap();
        let table = TemplateTable::from_file(&path).unwrap();
        assert_eq!(table.len(), 3);
        assert_eq!(table.get(0).name, "nop");
        assert_eq!(table.get(1).name, "write");
        assert_eq!(table.get(2).cycles, 3);
    }

    #[test]
    fn template_file_rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        for (name, body) in [
            ("gap.tsv", "0\tnop\t0\t1\n2\tskip\t0\t1\n"),
            ("dup.tsv", "0\tnop\t0\t1\n0\tagain\t0\t1\n"),
            ("fields.tsv", "0\tnop\t0\n"),
            ("zero.tsv", "0\tnop\t0\t0\n"),
            ("text.tsv", "0\tnop\tmany\t1\n"),
        ] {
            let path = dir.path().join(name);
            std::fs::write(&path, body).unwrap();
            assert!(
                matches!(
                    TemplateTable::from_file(&path),
                    Err(Error::TemplateTable { .. })
                ),
                "{name} should fail"
            );
        }
    }

    #[test]
    fn report_header_only_for_empty_stimulus() {
        let s = translate(&chrom(&[]), 32, &GrammarMode::RawBits);
        let report = decode_report(&s, &GrammarMode::RawBits);
        assert_eq!(report, "cycles=0 width=32 bytes_per_cycle=4\n");
    }

    #[test]
    fn report_lists_one_hex_line_per_cycle() {
        let s = translate(&chrom(&[0x0F, 0xA0, 0x01, 0x02]), 16, &GrammarMode::RawBits);
        let report = decode_report(&s, &GrammarMode::RawBits);
        let lines: Vec<&str> = report.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with("0f a0"));
        assert!(lines[2].ends_with("01 02"));
    }

    #[test]
    fn report_names_decoded_transactions() {
        let mode = GrammarMode::Transaction(demo_table());
        let s = translate(&chrom(&[0x00, 0x01, 0xAA, 0xBB]), 16, &mode);
        let report = decode_report(&s, &mode);
        let lines: Vec<&str> = report.lines().collect();
        assert!(lines[1].contains("nop"));
        assert!(lines[2].contains("write"));
    }

    proptest! {
        /// Raw packing equals a naive per-bit construction.
        #[test]
        fn raw_packing_matches_bit_oracle(
            bytes in proptest::collection::vec(any::<u8>(), 0..80),
            width in 1u32..40,
        ) {
            let s = translate(&chrom(&bytes), width, &GrammarMode::RawBits);
            let bpc = bytes_per_cycle(width);
            prop_assert_eq!(s.cycle_count() as usize, bytes.len().div_ceil(bpc));
            for (c, cycle) in s.cycles().enumerate() {
                for bit in 0..(bpc * 8) as u32 {
                    let got = (cycle[(bit / 8) as usize] >> (bit % 8)) & 1;
                    let src = c * bpc + (bit / 8) as usize;
                    let expected = if bit >= width {
                        0
                    } else if src < bytes.len() {
                        (bytes[src] >> (bit % 8)) & 1
                    } else {
                        0
                    };
                    prop_assert_eq!(got, expected, "cycle {} bit {}", c, bit);
                }
            }
        }

        /// Every translated stimulus is whole cycles of masked data.
        #[test]
        fn transaction_stimuli_are_whole_masked_cycles(
            bytes in proptest::collection::vec(any::<u8>(), 0..40),
            width in 9u32..24,
        ) {
            let mode = GrammarMode::Transaction(demo_table());
            let s = translate(&chrom(&bytes), width, &mode);
            prop_assert_eq!(s.data().len() % s.bytes_per_cycle(), 0);
            let span_cycles: u64 = s
                .tx_spans()
                .iter()
                .map(|&(_, c)| u64::from(c))
                .sum();
            prop_assert_eq!(span_cycles, s.cycle_count());
            let rem = width % 8;
            if rem != 0 {
                for cycle in s.cycles() {
                    prop_assert_eq!(cycle.last().unwrap() & !((1u8 << rem) - 1), 0);
                }
            }
        }
    }
}
