//! ARM / Thumb-2 analysis: function recovery, call sites and data references.
//!
//! Only the slice of the ISA the decomposition pipeline needs is decoded:
//! direct and indirect calls, branches, returns, pc-relative loads and
//! address arithmetic, `movw`/`movt` halves, and `push`/`pop` of the link
//! register. Everything else decodes as [`InsnKind::Other`] with the correct
//! width so that linear sweeps stay in sync.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::addr::Addr;
use crate::binary::{data_sections, BinaryImage, MappingKind, SymbolKind};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("image has no executable section")]
    NoExecutableSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsnKind {
    /// `bl` / `blx <imm>`; `exchange` is set when the callee runs in the
    /// other instruction set.
    Call {
        exchange: bool,
    },
    /// `blx <reg>`
    IndirectCall,
    Branch {
        conditional: bool,
    },
    /// `bx <reg>` other than `lr`, table branches.
    IndirectBranch,
    Return,
    /// `ldr rt, [pc, #imm]`; the target is the literal's address.
    PcRelativeLoad {
        rt: u8,
    },
    /// `movw` (`top == false`) or `movt` (`top == true`).
    MovImmediate {
        rd: u8,
        top: bool,
    },
    /// `adr rd, <label>` / `add rd, pc, #imm`; the target is the address.
    PcRelativeAddress {
        rd: u8,
    },
    /// `add rd, pc, rm` style arithmetic: `rd = rm + pc`.
    AddPc {
        rd: u8,
        rm: u8,
    },
    Push {
        saves_lr: bool,
    },
    Padding,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instruction {
    pub addr: Addr,
    pub size: u8,
    pub kind: InsnKind,
    pub target: Option<Addr>,
    pub immediate: Option<u32>,
}

impl Instruction {
    fn new(addr: Addr, size: u8, kind: InsnKind) -> Self {
        Instruction { addr, size, kind, target: None, immediate: None }
    }

    fn with_target(mut self, target: u64) -> Self {
        self.target = Some(Addr(target & 0xffff_ffff));
        self
    }

    fn with_imm(mut self, imm: u32) -> Self {
        self.immediate = Some(imm);
        self
    }
}

fn sign_extend(value: u32, bits: u32) -> i64 {
    let shift = 32 - bits;
    i64::from(((value << shift) as i32) >> shift)
}

fn align4(v: u64) -> u64 {
    v & !3
}

pub fn is_thumb32_prefix(hw: u16) -> bool {
    matches!(hw >> 11, 0b11101..=0b11111)
}

/// Decodes one Thumb instruction from its halfword(s). `hw2` is ignored for
/// 16-bit encodings and may be `None` at the end of a section.
pub fn decode_thumb(addr: Addr, hw1: u16, hw2: Option<u16>) -> Option<Instruction> {
    let pc = addr.0 + 4;
    if !is_thumb32_prefix(hw1) {
        return Some(decode_thumb16(addr, pc, hw1));
    }
    let hw2 = hw2?;
    Some(decode_thumb32(addr, pc, hw1, hw2))
}

fn decode_thumb16(addr: Addr, pc: u64, hw: u16) -> Instruction {
    let h = u32::from(hw);
    let insn = |kind| Instruction::new(addr, 2, kind);
    if hw == 0xbf00 || hw == 0x46c0 || hw == 0x0000 {
        return insn(InsnKind::Padding);
    }
    if h & 0xf800 == 0x4800 {
        let rt = ((h >> 8) & 7) as u8;
        return insn(InsnKind::PcRelativeLoad { rt }).with_target(align4(pc) + u64::from((h & 0xff) * 4));
    }
    if h & 0xf800 == 0xa000 {
        let rd = ((h >> 8) & 7) as u8;
        return insn(InsnKind::PcRelativeAddress { rd }).with_target(align4(pc) + u64::from((h & 0xff) * 4));
    }
    if h & 0xff87 == 0x4780 {
        return insn(InsnKind::IndirectCall);
    }
    if h & 0xff87 == 0x4700 {
        let rm = (h >> 3) & 0xf;
        return insn(if rm == 14 { InsnKind::Return } else { InsnKind::IndirectBranch });
    }
    if h & 0xff00 == 0x4400 {
        let rdn = (((h >> 4) & 8) | (h & 7)) as u8;
        let rm = ((h >> 3) & 0xf) as u8;
        if rm == 15 && rdn != 15 {
            return insn(InsnKind::AddPc { rd: rdn, rm: rdn });
        }
        return insn(InsnKind::Other);
    }
    if h & 0xfe00 == 0xb400 {
        return insn(InsnKind::Push { saves_lr: h & 0x100 != 0 });
    }
    if h & 0xfe00 == 0xbc00 {
        return insn(if h & 0x100 != 0 { InsnKind::Return } else { InsnKind::Other });
    }
    if h & 0xf000 == 0xd000 {
        let cond = (h >> 8) & 0xf;
        if cond < 0xe {
            let off = sign_extend((h & 0xff) << 1, 9);
            return insn(InsnKind::Branch { conditional: true }).with_target(pc.wrapping_add_signed(off));
        }
        return insn(InsnKind::Other);
    }
    if h & 0xf800 == 0xe000 {
        let off = sign_extend((h & 0x7ff) << 1, 12);
        return insn(InsnKind::Branch { conditional: false }).with_target(pc.wrapping_add_signed(off));
    }
    if h & 0xf500 == 0xb100 {
        let imm = (((h >> 9) & 1) << 6) | (((h >> 3) & 0x1f) << 1);
        return insn(InsnKind::Branch { conditional: true }).with_target(pc + u64::from(imm));
    }
    insn(InsnKind::Other)
}

fn decode_thumb32(addr: Addr, pc: u64, hw1: u16, hw2: u16) -> Instruction {
    let (h1, h2) = (u32::from(hw1), u32::from(hw2));
    let insn = |kind| Instruction::new(addr, 4, kind);

    if h1 & 0xf800 == 0xf000 && h2 & 0x8000 != 0 {
        let s = (h1 >> 10) & 1;
        let j1 = (h2 >> 13) & 1;
        let j2 = (h2 >> 11) & 1;
        let i1 = !(j1 ^ s) & 1;
        let i2 = !(j2 ^ s) & 1;
        let imm10 = h1 & 0x3ff;
        let imm11 = h2 & 0x7ff;
        match h2 & 0xd000 {
            0xd000 | 0x9000 => {
                let raw = (s << 24) | (i1 << 23) | (i2 << 22) | (imm10 << 12) | (imm11 << 1);
                let target = pc.wrapping_add_signed(sign_extend(raw, 25));
                let kind = if h2 & 0x4000 != 0 {
                    InsnKind::Call { exchange: false }
                } else {
                    InsnKind::Branch { conditional: false }
                };
                return insn(kind).with_target(target);
            }
            0xc000 => {
                let imm10l = (h2 >> 1) & 0x3ff;
                let raw = (s << 24) | (i1 << 23) | (i2 << 22) | (imm10 << 12) | (imm10l << 2);
                let target = align4(pc).wrapping_add_signed(sign_extend(raw, 25));
                return insn(InsnKind::Call { exchange: true }).with_target(target);
            }
            _ => {
                let cond = (h1 >> 6) & 0xf;
                if cond < 0xe {
                    let imm6 = h1 & 0x3f;
                    let raw = (s << 20) | (j2 << 19) | (j1 << 18) | (imm6 << 12) | (imm11 << 1);
                    let target = pc.wrapping_add_signed(sign_extend(raw, 21));
                    return insn(InsnKind::Branch { conditional: true }).with_target(target);
                }
                return insn(InsnKind::Other);
            }
        }
    }
    if h1 & 0xff7f == 0xf85f {
        let rt = (h2 >> 12) as u8;
        let imm = u64::from(h2 & 0xfff);
        let base = align4(pc);
        let target = if h1 & 0x80 != 0 { base + imm } else { base.wrapping_sub(imm) };
        return insn(InsnKind::PcRelativeLoad { rt }).with_target(target);
    }
    if h1 & 0xfb70 == 0xf240 && h2 & 0x8000 == 0 {
        let imm16 = ((h1 & 0xf) << 12) | (((h1 >> 10) & 1) << 11) | (((h2 >> 12) & 7) << 8) | (h2 & 0xff);
        let rd = ((h2 >> 8) & 0xf) as u8;
        let top = h1 & 0x0080 != 0;
        return insn(InsnKind::MovImmediate { rd, top }).with_imm(imm16);
    }
    if (h1 & 0xfbff == 0xf20f || h1 & 0xfbff == 0xf2af) && h2 & 0x8000 == 0 {
        let imm12 = u64::from((((h1 >> 10) & 1) << 11) | (((h2 >> 12) & 7) << 8) | (h2 & 0xff));
        let rd = ((h2 >> 8) & 0xf) as u8;
        let base = align4(pc);
        let target = if h1 & 0x00a0 == 0 { base + imm12 } else { base.wrapping_sub(imm12) };
        return insn(InsnKind::PcRelativeAddress { rd }).with_target(target);
    }
    if h1 == 0xe92d {
        return insn(InsnKind::Push { saves_lr: h2 & 0x4000 != 0 });
    }
    if h1 == 0xf84d && h2 == 0xed04 {
        return insn(InsnKind::Push { saves_lr: true });
    }
    if h1 == 0xe8bd {
        return insn(if h2 & 0x8000 != 0 { InsnKind::Return } else { InsnKind::Other });
    }
    if h1 == 0xf85d && h2 == 0xfb04 {
        return insn(InsnKind::Return);
    }
    if h1 & 0xfff0 == 0xe8d0 && h2 & 0xffe0 == 0xf000 {
        return insn(InsnKind::IndirectBranch);
    }
    insn(InsnKind::Other)
}

/// Decodes one A32 (ARM-state) instruction word.
pub fn decode_arm(addr: Addr, w: u32) -> Instruction {
    let pc = addr.0 + 8;
    let insn = |kind| Instruction::new(addr, 4, kind);
    let cond = w >> 28;
    if cond == 0xf {
        if w & 0xfe00_0000 == 0xfa00_0000 {
            let h = (w >> 24) & 1;
            let off = sign_extend(((w & 0x00ff_ffff) << 2) | (h << 1), 26);
            return insn(InsnKind::Call { exchange: true }).with_target(pc.wrapping_add_signed(off));
        }
        return insn(InsnKind::Other);
    }
    match w & 0x0f00_0000 {
        0x0b00_0000 => {
            let off = sign_extend((w & 0x00ff_ffff) << 2, 26);
            return insn(InsnKind::Call { exchange: false }).with_target(pc.wrapping_add_signed(off));
        }
        0x0a00_0000 => {
            let off = sign_extend((w & 0x00ff_ffff) << 2, 26);
            return insn(InsnKind::Branch { conditional: cond != 0xe }).with_target(pc.wrapping_add_signed(off));
        }
        _ => {}
    }
    if w & 0x0fff_fff0 == 0x012f_ff30 {
        return insn(InsnKind::IndirectCall);
    }
    if w & 0x0fff_fff0 == 0x012f_ff10 {
        return insn(if w & 0xf == 14 { InsnKind::Return } else { InsnKind::IndirectBranch });
    }
    if w & 0x0fff_ffff == 0x01a0_f00e {
        return insn(InsnKind::Return);
    }
    if w & 0x0f7f_0000 == 0x051f_0000 {
        let rt = ((w >> 12) & 0xf) as u8;
        let imm = u64::from(w & 0xfff);
        let target = if w & 0x0080_0000 != 0 { pc + imm } else { pc.wrapping_sub(imm) };
        return insn(InsnKind::PcRelativeLoad { rt }).with_target(target);
    }
    if w & 0x0fb0_0000 == 0x0300_0000 {
        let imm16 = (((w >> 16) & 0xf) << 12) | (w & 0xfff);
        let rd = ((w >> 12) & 0xf) as u8;
        let top = w & 0x0040_0000 != 0;
        return insn(InsnKind::MovImmediate { rd, top }).with_imm(imm16);
    }
    if w & 0x0fff_0000 == 0x028f_0000 || w & 0x0fff_0000 == 0x024f_0000 {
        let rot = ((w >> 8) & 0xf) * 2;
        let imm = u64::from((w & 0xff).rotate_right(rot));
        let rd = ((w >> 12) & 0xf) as u8;
        let target = if w & 0x0080_0000 != 0 { pc + imm } else { pc.wrapping_sub(imm) };
        return insn(InsnKind::PcRelativeAddress { rd }).with_target(target);
    }
    // add rd, pc, rm (unshifted)
    if w & 0x0fef_0ff0 == 0x008f_0000 {
        let rd = ((w >> 12) & 0xf) as u8;
        let rm = (w & 0xf) as u8;
        if rd != 15 && rm != 15 {
            return insn(InsnKind::AddPc { rd, rm });
        }
    }
    if w & 0x0fff_0000 == 0x092d_0000 {
        return insn(InsnKind::Push { saves_lr: w & 0x4000 != 0 });
    }
    if w & 0x0fff_ffff == 0x052d_e004 {
        return insn(InsnKind::Push { saves_lr: true });
    }
    if w & 0x0fff_0000 == 0x08bd_0000 {
        return insn(if w & 0x8000 != 0 { InsnKind::Return } else { InsnKind::Other });
    }
    if w & 0x0fff_ffff == 0x049d_f004 {
        return insn(InsnKind::Return);
    }
    insn(InsnKind::Other)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionRecord {
    pub entry: Addr,
    /// Exclusive end address.
    pub end: Addr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub thumb: bool,
}

impl FunctionRecord {
    pub fn contains(&self, addr: Addr) -> bool {
        self.entry <= addr && addr < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CallSite {
    pub caller: Addr,
    pub callee: Addr,
    pub site: Addr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DataRef {
    pub function: Addr,
    pub data_addr: Addr,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallExtraction {
    pub sites: Vec<CallSite>,
    /// `blx <reg>` sites, which cannot be resolved statically.
    pub indirect_calls: usize,
    /// `bx <reg>` / table branches.
    pub indirect_jumps: usize,
    /// Direct calls whose target is not a known function entry.
    pub unresolved: usize,
}

/// Linear decoder over an address range that honors mapping symbols and
/// skips literal pools it has already seen referenced.
struct Sweep<'a> {
    image: &'a BinaryImage,
    mapping: Vec<(Addr, MappingKind)>,
}

impl<'a> Sweep<'a> {
    fn new(image: &'a BinaryImage) -> Self {
        Sweep { image, mapping: image.mapping_symbols() }
    }

    fn mapping_at(&self, addr: Addr) -> Option<MappingKind> {
        let idx = self.mapping.partition_point(|(a, _)| *a <= addr);
        idx.checked_sub(1).map(|i| self.mapping[i].1)
    }

    fn next_mapping_after(&self, addr: Addr) -> Option<Addr> {
        let idx = self.mapping.partition_point(|(a, _)| *a <= addr);
        self.mapping[idx..].iter().find(|(_, k)| *k != MappingKind::Data).map(|(a, _)| *a)
    }

    fn decode_at(&self, addr: Addr, thumb: bool) -> Option<Instruction> {
        if thumb {
            let hw1 = self.image.read_u16(addr)?;
            let hw2 = self.image.read_u16(addr.offset(2));
            decode_thumb(addr, hw1, hw2)
        } else {
            let w = self.image.read_u32(addr)?;
            Some(decode_arm(addr, w))
        }
    }

    fn run(&self, range: Range<Addr>, thumb: bool, mut visit: impl FnMut(&Instruction)) {
        let mut pc = range.start;
        let mut thumb = thumb;
        let mut pools: BTreeSet<Addr> = BTreeSet::new();
        while pc < range.end {
            match self.mapping_at(pc) {
                Some(MappingKind::Data) => {
                    match self.next_mapping_after(pc) {
                        Some(next) if next < range.end => pc = next,
                        _ => break,
                    }
                    continue;
                }
                Some(MappingKind::Thumb) => thumb = true,
                Some(MappingKind::Arm) => thumb = false,
                None => {}
            }
            if pools.remove(&pc) {
                pc = pc.offset(4);
                continue;
            }
            let Some(insn) = self.decode_at(pc, thumb) else {
                break;
            };
            if pc.0 + u64::from(insn.size) > range.end.0 {
                break;
            }
            if let (InsnKind::PcRelativeLoad { .. }, Some(t)) = (insn.kind, insn.target) {
                if t > pc && t < range.end {
                    pools.insert(t);
                }
            }
            visit(&insn);
            pc = pc.offset(i64::from(insn.size));
        }
    }
}

/// Recovers function extents. Function symbols are used verbatim when
/// present; otherwise entries come from `seeds`, the image entry point,
/// call targets (to a fixpoint) and `push {.., lr}` prologues that follow a
/// terminator.
pub fn recover_functions(image: &BinaryImage, seeds: &[Addr]) -> Result<Vec<FunctionRecord>, AnalysisError> {
    let exec: Vec<Range<Addr>> = image.executable_ranges();
    if exec.is_empty() {
        return Err(AnalysisError::NoExecutableSection);
    }
    let in_exec = |a: Addr| exec.iter().any(|r| r.contains(&a));

    // entry -> (thumb, name)
    let mut entries: BTreeMap<Addr, (bool, Option<String>)> = BTreeMap::new();

    if image.has_function_symbols() {
        let mut syms: Vec<_> =
            image.symbols.iter().filter(|s| s.kind == SymbolKind::Function && s.defined && in_exec(s.addr)).collect();
        syms.sort_by(|a, b| (a.addr, &a.name).cmp(&(b.addr, &b.name)));
        for s in syms {
            entries.entry(s.addr).or_insert((s.thumb, Some(s.name.clone())));
        }
    } else {
        discover_entries(image, seeds, &exec, &mut entries);
    }

    Ok(assemble_records(entries, &exec))
}

fn assemble_records(entries: BTreeMap<Addr, (bool, Option<String>)>, exec: &[Range<Addr>]) -> Vec<FunctionRecord> {
    let list: Vec<_> = entries.into_iter().collect();
    let mut out = Vec::with_capacity(list.len());
    for (i, (entry, (thumb, name))) in list.iter().enumerate() {
        let Some(section) = exec.iter().find(|r| r.contains(entry)) else {
            continue;
        };
        let end = list.get(i + 1).map(|(next, _)| *next).filter(|next| section.contains(next)).unwrap_or(section.end);
        out.push(FunctionRecord { entry: *entry, end, name: name.clone(), thumb: *thumb });
    }
    out
}

fn discover_entries(
    image: &BinaryImage,
    seeds: &[Addr],
    exec: &[Range<Addr>],
    entries: &mut BTreeMap<Addr, (bool, Option<String>)>,
) {
    let sweep = Sweep::new(image);
    let in_exec = |a: Addr| exec.iter().any(|r| r.contains(&a));
    let add = |entries: &mut BTreeMap<Addr, (bool, Option<String>)>, raw: Addr, thumb: bool| -> bool {
        let a = Addr(raw.0 & !1);
        if !in_exec(a) || entries.contains_key(&a) {
            return false;
        }
        entries.insert(a, (thumb, None));
        true
    };

    // Cortex-M has no ARM state, so everything not proven otherwise is Thumb.
    for s in seeds {
        add(entries, *s, true);
    }
    add(entries, image.entry_point, true);

    for range in exec {
        let mut boundary = true;
        let mut found = Vec::new();
        sweep.run(range.clone(), true, |insn| {
            match insn.kind {
                InsnKind::Call { exchange } => {
                    if let Some(t) = insn.target {
                        found.push((t, !exchange));
                    }
                }
                InsnKind::Push { saves_lr: true } if boundary => found.push((insn.addr, true)),
                _ => {}
            }
            boundary = match insn.kind {
                InsnKind::Return | InsnKind::IndirectBranch | InsnKind::Branch { conditional: false } => true,
                InsnKind::Padding => boundary,
                _ => false,
            };
        });
        for (a, thumb) in found {
            add(entries, a, thumb);
        }
    }

    // Call targets reached from properly aligned entries, to a fixpoint.
    let mut work: Vec<Addr> = entries.keys().copied().collect();
    let mut visited = BTreeSet::new();
    while let Some(entry) = work.pop() {
        if !visited.insert(entry) {
            continue;
        }
        let thumb = entries[&entry].0;
        let Some(section) = exec.iter().find(|r| r.contains(&entry)) else {
            continue;
        };
        let end = entries
            .range(entry.offset(1)..)
            .next()
            .map(|(a, _)| *a)
            .filter(|a| section.contains(a))
            .unwrap_or(section.end);
        let mut targets = Vec::new();
        sweep.run(entry..end, thumb, |insn| {
            if let (InsnKind::Call { exchange }, Some(t)) = (insn.kind, insn.target) {
                targets.push((t, thumb ^ exchange));
            }
        });
        for (t, t_thumb) in targets {
            if add(entries, t, t_thumb) {
                work.push(Addr(t.0 & !1));
            }
        }
    }
}

/// One call site per static `bl`/`blx <imm>` whose target is a known entry,
/// plus branches that land on another function's entry (tail calls).
pub fn extract_calls(image: &BinaryImage, functions: &[FunctionRecord]) -> CallExtraction {
    let sweep = Sweep::new(image);
    let known: BTreeSet<Addr> = functions.iter().map(|f| f.entry).collect();
    let mut out = CallExtraction::default();
    for f in functions {
        sweep.run(f.entry..f.end, f.thumb, |insn| match (insn.kind, insn.target) {
            (InsnKind::Call { .. }, Some(t)) => {
                let t = Addr(t.0 & !1);
                if known.contains(&t) {
                    out.sites.push(CallSite { caller: f.entry, callee: t, site: insn.addr });
                } else {
                    out.unresolved += 1;
                }
            }
            (InsnKind::Branch { .. }, Some(t)) => {
                if t != f.entry && !f.contains(t) && known.contains(&t) {
                    out.sites.push(CallSite { caller: f.entry, callee: t, site: insn.addr });
                }
            }
            (InsnKind::IndirectCall, _) => out.indirect_calls += 1,
            (InsnKind::IndirectBranch, _) => out.indirect_jumps += 1,
            _ => {}
        });
    }
    out
}

/// Data references from each function into `.data`, `.bss` or `.rodata`,
/// found through literal-pool loads, `movw`/`movt` pairs and pc-relative
/// address arithmetic. De-duplicated per (function, address) and sorted.
pub fn extract_data_refs(image: &BinaryImage, functions: &[FunctionRecord]) -> Vec<DataRef> {
    let ranges: Vec<Range<u64>> = data_sections(image).iter().map(|s| s.vaddr.0..s.end().0).collect();
    let is_data = |v: u64| ranges.iter().any(|r| r.contains(&v));
    let sweep = Sweep::new(image);
    let mut refs = BTreeSet::new();

    for f in functions {
        let mut low_half: [Option<u32>; 16] = [None; 16];
        let mut known: [Option<u32>; 16] = [None; 16];
        let pc_bias = if f.thumb { 4 } else { 8 };
        sweep.run(f.entry..f.end, f.thumb, |insn| {
            let mut emit = |v: u64| {
                if is_data(v) {
                    refs.insert(DataRef { function: f.entry, data_addr: Addr(v) });
                }
            };
            match insn.kind {
                InsnKind::PcRelativeLoad { rt } => {
                    let value = insn.target.and_then(|t| image.read_u32(t));
                    if let Some(v) = value {
                        emit(u64::from(v));
                    }
                    known[usize::from(rt & 0xf)] = value;
                }
                InsnKind::MovImmediate { rd, top: false } => {
                    let imm = insn.immediate.unwrap_or(0);
                    low_half[usize::from(rd)] = Some(imm);
                    known[usize::from(rd)] = Some(imm);
                }
                InsnKind::MovImmediate { rd, top: true } => {
                    let rd = usize::from(rd);
                    let imm = insn.immediate.unwrap_or(0);
                    known[rd] = match low_half[rd].take() {
                        Some(lo) => {
                            let v = (imm << 16) | lo;
                            emit(u64::from(v));
                            Some(v)
                        }
                        None => None,
                    };
                }
                InsnKind::PcRelativeAddress { rd } => {
                    if let Some(t) = insn.target {
                        emit(t.0);
                        known[usize::from(rd)] = Some(t.0 as u32);
                    }
                }
                InsnKind::AddPc { rd, rm } => {
                    let v = known[usize::from(rm)].map(|k| k.wrapping_add((insn.addr.0 + pc_bias) as u32));
                    if let Some(v) = v {
                        emit(u64::from(v));
                    }
                    known[usize::from(rd)] = v;
                }
                InsnKind::Call { .. } | InsnKind::IndirectCall => {
                    // r0-r3 and r12 are caller-saved.
                    for r in [0, 1, 2, 3, 12] {
                        known[r] = None;
                    }
                }
                _ => {}
            }
        });
    }
    refs.into_iter().collect()
}
