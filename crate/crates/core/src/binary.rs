//! ELF firmware images: sections, symbols and the name/address map used to
//! align recovered functions with source code.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use object::elf;
use object::read::elf::{FileHeader, SectionHeader, Sym};
use serde::{Deserialize, Serialize};

use crate::addr::Addr;

const EI_CLASS: usize = 4;
const EI_DATA: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum BinaryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not an ELF file")]
    NotElf,
    #[error("unsupported machine {0} (only 32-bit ARM is supported)")]
    UnsupportedMachine(u16),
    #[error("truncated file: {0}")]
    TruncatedFile(String),
    #[error("sections {first} and {second} overlap")]
    OverlappingSections { first: String, second: String },
    #[error("malformed ELF: {0}")]
    Malformed(String),
    #[error("image has neither function symbols nor DWARF subprograms")]
    NoSymbolInformation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endianness {
    Little,
    Big,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Machine {
    Arm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SectionFlags {
    pub executable: bool,
    pub writable: bool,
    pub allocated: bool,
    pub has_file_bytes: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub vaddr: Addr,
    pub size: u64,
    pub flags: SectionFlags,
    /// Raw content; empty for `.bss`-like sections.
    pub bytes: Vec<u8>,
}

impl Section {
    pub fn end(&self) -> Addr {
        Addr(self.vaddr.0 + self.size)
    }

    pub fn contains(&self, addr: Addr) -> bool {
        self.vaddr <= addr && addr.0 < self.vaddr.0 + self.size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    Function,
    Object,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolEntry {
    pub name: String,
    /// Address with the Thumb mode bit already removed for functions.
    pub addr: Addr,
    pub size: u64,
    pub kind: SymbolKind,
    pub thumb: bool,
    /// False for undefined or absolute symbols.
    pub defined: bool,
}

/// ARM ELF mapping symbols (`$a`, `$t`, `$d`) mark where code turns into
/// data inside executable sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappingKind {
    Arm,
    Thumb,
    Data,
}

#[derive(Debug, Clone)]
pub struct BinaryImage {
    pub path: PathBuf,
    pub machine: Machine,
    pub endianness: Endianness,
    pub entry_point: Addr,
    /// Allocated sections in ascending address order.
    pub sections: Vec<Section>,
    pub symbols: Vec<SymbolEntry>,
    debug: BTreeMap<String, Vec<u8>>,
}

impl BinaryImage {
    /// Assembles an image from already-decoded parts (synthetic images,
    /// tests). Sections are sorted and checked for overlap.
    pub fn from_parts(
        endianness: Endianness,
        entry_point: Addr,
        mut sections: Vec<Section>,
        symbols: Vec<SymbolEntry>,
    ) -> Result<Self, BinaryError> {
        sections.sort_by(|a, b| (a.vaddr, &a.name).cmp(&(b.vaddr, &b.name)));
        check_overlaps(&sections)?;
        Ok(BinaryImage {
            path: PathBuf::from("<memory>"),
            machine: Machine::Arm,
            endianness,
            entry_point,
            sections,
            symbols,
            debug: BTreeMap::new(),
        })
    }

    pub fn section_containing(&self, addr: Addr) -> Option<&Section> {
        self.sections.iter().find(|s| s.size > 0 && s.contains(addr))
    }

    pub fn executable_sections(&self) -> impl Iterator<Item = &Section> {
        self.sections.iter().filter(|s| s.flags.executable)
    }

    pub fn executable_ranges(&self) -> Vec<std::ops::Range<Addr>> {
        self.executable_sections().map(|s| s.vaddr..s.end()).collect()
    }

    pub fn is_executable(&self, addr: Addr) -> bool {
        self.section_containing(addr).is_some_and(|s| s.flags.executable)
    }

    pub fn bytes_at(&self, addr: Addr, len: usize) -> Option<&[u8]> {
        let s = self.section_containing(addr)?;
        if !s.flags.has_file_bytes {
            return None;
        }
        let off = (addr.0 - s.vaddr.0) as usize;
        s.bytes.get(off..off.checked_add(len)?)
    }

    pub fn read_u16(&self, addr: Addr) -> Option<u16> {
        let b: [u8; 2] = self.bytes_at(addr, 2)?.try_into().ok()?;
        Some(match self.endianness {
            Endianness::Little => u16::from_le_bytes(b),
            Endianness::Big => u16::from_be_bytes(b),
        })
    }

    pub fn read_u32(&self, addr: Addr) -> Option<u32> {
        let b: [u8; 4] = self.bytes_at(addr, 4)?.try_into().ok()?;
        Some(match self.endianness {
            Endianness::Little => u32::from_le_bytes(b),
            Endianness::Big => u32::from_be_bytes(b),
        })
    }

    pub fn has_function_symbols(&self) -> bool {
        self.symbols.iter().any(|s| s.kind == SymbolKind::Function && s.defined)
    }

    /// Mapping symbols sorted by address.
    pub fn mapping_symbols(&self) -> Vec<(Addr, MappingKind)> {
        let mut out: Vec<(Addr, MappingKind)> = self
            .symbols
            .iter()
            .filter_map(|s| {
                let kind = match s.name.split('.').next()? {
                    "$a" => MappingKind::Arm,
                    "$t" => MappingKind::Thumb,
                    "$d" => MappingKind::Data,
                    _ => return None,
                };
                Some((s.addr, kind))
            })
            .collect();
        out.sort_by_key(|(a, k)| (*a, *k as u8));
        out
    }

    pub fn has_dwarf(&self) -> bool {
        self.debug.contains_key(".debug_info")
    }

    fn debug_section(&self, name: &str) -> &[u8] {
        self.debug.get(name).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// The `.data`, `.bss` and `.rodata` sections present in the image, in
/// ascending address order.
pub fn data_sections(image: &BinaryImage) -> Vec<&Section> {
    let mut out: Vec<&Section> =
        image.sections.iter().filter(|s| matches!(s.name.as_str(), ".data" | ".bss" | ".rodata")).collect();
    out.sort_by_key(|s| s.vaddr);
    out
}

pub fn load_elf(path: impl AsRef<Path>) -> Result<BinaryImage, BinaryError> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|source| BinaryError::Io { path: path.to_path_buf(), source })?;
    parse_elf(path, &data)
}

pub fn parse_elf(path: impl AsRef<Path>, data: &[u8]) -> Result<BinaryImage, BinaryError> {
    if data.len() < 20 || data[..4] != elf::ELFMAG {
        return Err(BinaryError::NotElf);
    }
    let ident_endian = match data[EI_DATA] {
        elf::ELFDATA2LSB => Endianness::Little,
        elf::ELFDATA2MSB => Endianness::Big,
        _ => return Err(BinaryError::NotElf),
    };
    // e_machine sits at the same offset for both ELF classes.
    let raw_machine = match ident_endian {
        Endianness::Little => u16::from_le_bytes([data[18], data[19]]),
        Endianness::Big => u16::from_be_bytes([data[18], data[19]]),
    };
    if raw_machine != elf::EM_ARM || data[EI_CLASS] != elf::ELFCLASS32 {
        return Err(BinaryError::UnsupportedMachine(raw_machine));
    }

    let header =
        elf::FileHeader32::<object::Endianness>::parse(data).map_err(|e| BinaryError::TruncatedFile(e.to_string()))?;
    let endian = header.endian().map_err(|e| BinaryError::Malformed(e.to_string()))?;
    let table = header.sections(endian, data).map_err(|e| BinaryError::TruncatedFile(e.to_string()))?;

    let mut sections = Vec::new();
    let mut debug = BTreeMap::new();
    for section in table.iter() {
        let name = table.section_name(endian, section).map_err(|e| BinaryError::Malformed(e.to_string()))?;
        let name = String::from_utf8_lossy(name).into_owned();
        let flags = section.sh_flags(endian);
        let sh_type = section.sh_type(endian);
        let has_file_bytes = sh_type != elf::SHT_NOBITS && sh_type != elf::SHT_NULL;
        let allocated = flags & elf::SHF_ALLOC != 0;
        if allocated {
            let size = u64::from(section.sh_size(endian));
            let bytes = if has_file_bytes {
                section
                    .data(endian, data)
                    .map_err(|_| BinaryError::TruncatedFile(format!("section {name} extends past end of file")))?
                    .to_vec()
            } else {
                Vec::new()
            };
            sections.push(Section {
                name,
                vaddr: Addr(u64::from(section.sh_addr(endian))),
                size,
                flags: SectionFlags {
                    executable: flags & elf::SHF_EXECINSTR != 0,
                    writable: flags & elf::SHF_WRITE != 0,
                    allocated,
                    has_file_bytes,
                },
                bytes,
            });
        } else if name.starts_with(".debug_") {
            let bytes = section
                .data(endian, data)
                .map_err(|_| BinaryError::TruncatedFile(format!("section {name} extends past end of file")))?;
            debug.insert(name, bytes.to_vec());
        }
    }
    sections.sort_by(|a, b| (a.vaddr, &a.name).cmp(&(b.vaddr, &b.name)));
    check_overlaps(&sections)?;

    let mut symbols = Vec::new();
    let symtab = table.symbols(endian, data, elf::SHT_SYMTAB).map_err(|e| BinaryError::Malformed(e.to_string()))?;
    for sym in symtab.iter().skip(1) {
        let name = sym.name(endian, symtab.strings()).map_err(|e| BinaryError::Malformed(e.to_string()))?;
        let name = String::from_utf8_lossy(name).into_owned();
        let value = u64::from(sym.st_value(endian));
        let shndx = sym.st_shndx(endian);
        let defined = shndx != elf::SHN_UNDEF && shndx != elf::SHN_ABS;
        let (kind, addr, thumb) = match sym.st_type() {
            elf::STT_FUNC => (SymbolKind::Function, value & !1, value & 1 == 1),
            elf::STT_OBJECT => (SymbolKind::Object, value, false),
            elf::STT_FILE | elf::STT_SECTION => continue,
            _ => (SymbolKind::Other, value, false),
        };
        symbols.push(SymbolEntry {
            name,
            addr: Addr(addr),
            size: u64::from(sym.st_size(endian)),
            kind,
            thumb,
            defined,
        });
    }

    Ok(BinaryImage {
        path: path.as_ref().to_path_buf(),
        machine: Machine::Arm,
        endianness: match endian {
            object::Endianness::Little => Endianness::Little,
            object::Endianness::Big => Endianness::Big,
        },
        entry_point: Addr(u64::from(header.e_entry(endian))),
        sections,
        symbols,
        debug,
    })
}

fn check_overlaps(sorted: &[Section]) -> Result<(), BinaryError> {
    let sized: Vec<&Section> = sorted.iter().filter(|s| s.size > 0).collect();
    for pair in sized.windows(2) {
        if pair[0].end() > pair[1].vaddr {
            return Err(BinaryError::OverlappingSections { first: pair[0].name.clone(), second: pair[1].name.clone() });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedEntry {
    pub name: String,
    pub thumb: bool,
}

/// Function name ↔ entry address map; at most one name per address.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameAddressMap {
    pub entries: BTreeMap<Addr, NamedEntry>,
}

impl NameAddressMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, addr: Addr, name: impl Into<String>, thumb: bool) {
        self.entries.insert(addr, NamedEntry { name: name.into(), thumb });
    }

    pub fn name_of(&self, addr: Addr) -> Option<&str> {
        self.entries.get(&addr).map(|e| e.name.as_str())
    }

    /// All addresses carrying `name` (static functions may share names).
    pub fn addresses_of(&self, name: &str) -> Vec<Addr> {
        self.entries.iter().filter(|(_, e)| e.name == name).map(|(a, _)| *a).collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.values().map(|e| e.name.as_str())
    }
}

/// Builds the name map from the symbol table, then overlays DWARF
/// subprograms; a DWARF entry replaces any symbol at the same address.
pub fn build_name_address_map(image: &BinaryImage) -> Result<NameAddressMap, BinaryError> {
    let mut map = NameAddressMap::default();
    let mut thumb_at: BTreeMap<Addr, bool> = BTreeMap::new();

    let mut funcs: Vec<&SymbolEntry> =
        image.symbols.iter().filter(|s| s.kind == SymbolKind::Function && s.defined).collect();
    // Deterministic pick among aliases at one address.
    funcs.sort_by(|a, b| (a.addr, &a.name).cmp(&(b.addr, &b.name)));
    for sym in funcs {
        thumb_at.entry(sym.addr).or_insert(sym.thumb);
        map.entries.entry(sym.addr).or_insert_with(|| NamedEntry { name: sym.name.clone(), thumb: sym.thumb });
    }

    if image.has_dwarf() {
        for (name, raw) in dwarf_subprograms(image)? {
            let addr = Addr(raw & !1);
            let thumb = thumb_at.get(&addr).copied().unwrap_or(raw & 1 == 1);
            map.insert(addr, name, thumb);
        }
    }

    if map.is_empty() {
        return Err(BinaryError::NoSymbolInformation);
    }
    Ok(map)
}

/// `(name, low_pc)` for every DWARF subprogram that has code.
fn dwarf_subprograms(image: &BinaryImage) -> Result<Vec<(String, u64)>, BinaryError> {
    let endian = match image.endianness {
        Endianness::Little => gimli::RunTimeEndian::Little,
        Endianness::Big => gimli::RunTimeEndian::Big,
    };
    let load = |id: gimli::SectionId| -> Result<gimli::EndianSlice<'_, gimli::RunTimeEndian>, gimli::Error> {
        Ok(gimli::EndianSlice::new(image.debug_section(id.name()), endian))
    };
    let dwarf = gimli::Dwarf::load(load).map_err(dwarf_err)?;

    let mut out = Vec::new();
    let mut units = dwarf.units();
    while let Some(header) = units.next().map_err(dwarf_err)? {
        let unit = dwarf.unit(header).map_err(dwarf_err)?;
        let mut cursor = unit.entries();
        while let Some((_, entry)) = cursor.next_dfs().map_err(dwarf_err)? {
            if entry.tag() != gimli::DW_TAG_subprogram {
                continue;
            }
            let Some(low) = entry.attr_value(gimli::DW_AT_low_pc).map_err(dwarf_err)? else {
                continue;
            };
            let Some(low_pc) = dwarf.attr_address(&unit, low).map_err(dwarf_err)? else {
                continue;
            };
            if low_pc == 0 {
                continue;
            }
            if let Some(name) = subprogram_name(&dwarf, &unit, entry, 0)? {
                out.push((name, low_pc));
            }
        }
    }
    Ok(out)
}

type Slice<'a> = gimli::EndianSlice<'a, gimli::RunTimeEndian>;

fn subprogram_name(
    dwarf: &gimli::Dwarf<Slice<'_>>,
    unit: &gimli::Unit<Slice<'_>>,
    entry: &gimli::DebuggingInformationEntry<'_, '_, Slice<'_>>,
    depth: usize,
) -> Result<Option<String>, BinaryError> {
    if let Some(value) = entry.attr_value(gimli::DW_AT_name).map_err(dwarf_err)? {
        let s = dwarf.attr_string(unit, value).map_err(dwarf_err)?;
        return Ok(Some(s.to_string_lossy().into_owned()));
    }
    if depth > 4 {
        return Ok(None);
    }
    for at in [gimli::DW_AT_specification, gimli::DW_AT_abstract_origin] {
        if let Some(gimli::AttributeValue::UnitRef(offset)) = entry.attr_value(at).map_err(dwarf_err)? {
            let target = unit.entry(offset).map_err(dwarf_err)?;
            if let Some(name) = subprogram_name(dwarf, unit, &target, depth + 1)? {
                return Ok(Some(name));
            }
        }
    }
    Ok(None)
}

fn dwarf_err(e: gimli::Error) -> BinaryError {
    BinaryError::Malformed(format!("DWARF: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn section(name: &str, vaddr: u64, size: u64, exec: bool) -> Section {
        Section {
            name: name.into(),
            vaddr: Addr(vaddr),
            size,
            flags: SectionFlags { executable: exec, writable: !exec, allocated: true, has_file_bytes: true },
            bytes: vec![0; size as usize],
        }
    }

    fn synthetic(sections: Vec<Section>, symbols: Vec<SymbolEntry>) -> BinaryImage {
        BinaryImage::from_parts(Endianness::Little, Addr(0), sections, symbols).unwrap()
    }

    #[test]
    fn four_zero_bytes_are_not_elf() {
        assert!(matches!(parse_elf("x", &[0, 0, 0, 0]), Err(BinaryError::NotElf)));
    }

    #[test]
    fn x86_64_header_is_unsupported() {
        let mut hdr = vec![0u8; 64];
        hdr[..4].copy_from_slice(&elf::ELFMAG);
        hdr[EI_CLASS] = elf::ELFCLASS64;
        hdr[EI_DATA] = elf::ELFDATA2LSB;
        hdr[6] = 1;
        hdr[18..20].copy_from_slice(&elf::EM_X86_64.to_le_bytes());
        assert!(matches!(
            parse_elf("x", &hdr),
            Err(BinaryError::UnsupportedMachine(m)) if m == elf::EM_X86_64
        ));
    }

    #[test]
    fn data_sections_filters_by_name_in_address_order() {
        let img = synthetic(
            vec![
                section(".text", 0x1000, 0x10, true),
                section(".rodata", 0x2000, 0x10, false),
                section(".data", 0x3000, 0x10, false),
                section(".bss", 0x4000, 0x10, false),
            ],
            vec![],
        );
        let names: Vec<_> = data_sections(&img).iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, [".rodata", ".data", ".bss"]);

        let only_text = synthetic(vec![section(".text", 0x1000, 0x10, true)], vec![]);
        assert!(data_sections(&only_text).is_empty());
    }

    #[test]
    fn overlapping_sections_rejected() {
        let secs = vec![section(".text", 0x1000, 0x20, true), section(".data", 0x1010, 0x20, false)];
        assert!(matches!(check_overlaps(&secs), Err(BinaryError::OverlappingSections { .. })));
    }

    #[test]
    fn thumb_bit_is_normalized_in_name_map() {
        let img = synthetic(
            vec![section(".text", 0x8000, 0x100, true)],
            vec![SymbolEntry {
                name: "f".into(),
                addr: Addr(0x8000),
                size: 4,
                kind: SymbolKind::Function,
                thumb: true,
                defined: true,
            }],
        );
        let map = build_name_address_map(&img).unwrap();
        assert_eq!(map.name_of(Addr(0x8000)), Some("f"));
        assert!(map.entries[&Addr(0x8000)].thumb);
    }

    #[test]
    fn stripped_image_has_no_symbol_information() {
        let img = synthetic(vec![section(".text", 0x8000, 0x100, true)], vec![]);
        assert!(matches!(build_name_address_map(&img), Err(BinaryError::NoSymbolInformation)));
    }

    #[test]
    fn endianness_controls_word_reads() {
        let mut s = section(".rodata", 0x100, 4, false);
        s.bytes = vec![0x01, 0x02, 0x03, 0x04];
        let mut img = synthetic(vec![s], vec![]);
        assert_eq!(img.read_u32(Addr(0x100)), Some(0x0403_0201));
        img.endianness = Endianness::Big;
        assert_eq!(img.read_u32(Addr(0x100)), Some(0x0102_0304));
        assert_eq!(img.read_u32(Addr(0x102)), None);
    }
}
