#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "morphome/msd_tag.hpp"
#include "morphome/unicode.hpp"

namespace morphome {

// Thrown for malformed corpus input. Carries the 1-based line number when
// the error comes from a specific line (0 otherwise).
class CorpusError : public std::runtime_error {
 public:
  CorpusError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class VerbClass { kL, kNL };
std::string_view verb_class_name(VerbClass c);
VerbClass parse_verb_class(std::string_view text);

struct ParadigmEntry {
  IpaString lemma;
  IpaString form;
  MsdTag tag;
  std::size_t line = 0;

  friend bool operator==(const ParadigmEntry& a, const ParadigmEntry& b) {
    return a.lemma == b.lemma && a.form == b.form && a.tag == b.tag;
  }
};

struct InflectionTable {
  IpaString lemma;
  std::array<IpaString, kCellCount> cells;  // indexed by MsdTag::index()
  VerbClass verb_class = VerbClass::kNL;

  const IpaString& form(const MsdTag& tag) const { return cells[static_cast<std::size_t>(tag.index())]; }
};

struct ParseStats {
  std::size_t lines = 0;
  std::size_t blank = 0;
  std::size_t accepted = 0;
  std::size_t out_of_inventory = 0;
};

// One UniMorph TSV stream (lemma<TAB>form<TAB>tag). Tags outside the 12
// present cells are dropped and counted; malformed lines throw CorpusError.
std::vector<ParadigmEntry> parse_unimorph(std::istream& in, ParseStats* stats = nullptr);

enum class ConflictPolicy {
  kError,      // conflicting duplicate (lemma, tag) aborts assembly
  kDropLemma,  // the lemma is dropped and reported instead
};

struct AssemblyReport {
  std::size_t duplicates_removed = 0;
  std::vector<std::pair<IpaString, int>> incomplete;  // lemma, number of cells present
  std::vector<IpaString> conflicting;
};

// Groups entries per lemma and keeps the lemmas with all 12 cells, sorted by
// lemma. Tables come back with verb_class unset (kNL); see classify_verb.
std::vector<InflectionTable> assemble_tables(const std::vector<ParadigmEntry>& entries,
                                             AssemblyReport* report = nullptr,
                                             ConflictPolicy policy = ConflictPolicy::kError);

// Present-tense endings per mood, stress-stripped.
class EndingInventory {
 public:
  EndingInventory() = default;
  EndingInventory(std::vector<IpaString> indicative, std::vector<IpaString> subjunctive);

  static const EndingInventory& spanish_present();
  // Lines of "<IND|SBJV>\t<ending>"; '#' starts a comment.
  static EndingInventory read(std::istream& in);
  void write(std::ostream& out) const;

  const std::vector<IpaString>& endings(Mood mood) const {
    return mood == Mood::kIndicative ? indicative_ : subjunctive_;
  }
  // Longest ending of the mood that is a suffix of `stripped`.
  std::optional<IpaString> longest_match(const IpaString& stripped, Mood mood) const;

 private:
  std::vector<IpaString> indicative_;
  std::vector<IpaString> subjunctive_;
};

struct Stem {
  IpaString surface;        // stress markers removed
  IpaString final_cluster;  // maximal trailing consonant run, possibly empty

  friend bool operator==(const Stem&, const Stem&) = default;
};

// Stem + ending split of one form, keeping what is needed to rebuild it.
struct Segmentation {
  Stem stem;
  IpaString ending;
  std::vector<std::pair<std::size_t, char32_t>> stress;  // position in the original form, marker

  IpaString reassemble() const;
};

IpaString final_consonant_cluster(const IpaString& stem);

std::optional<Segmentation> try_segment(const IpaString& form, const MsdTag& tag,
                                        const EndingInventory& inventory = EndingInventory::spanish_present());

// Throws CorpusError carrying the form when no inventory ending matches.
Stem extract_stem(const IpaString& form, const MsdTag& tag,
                  const EndingInventory& inventory = EndingInventory::spanish_present());

// L iff the IND.PRS.1SG stem equals the stem of all six SBJV.PRS cells and
// differs from the stem of at least one Out indicative cell. A table with a
// cell that cannot be segmented is NL.
VerbClass classify_verb(const InflectionTable& table,
                        const EndingInventory& inventory = EndingInventory::spanish_present());

void classify_all(std::vector<InflectionTable>& tables,
                  const EndingInventory& inventory = EndingInventory::spanish_present());

// Lemma-level alternation pair: the stem-final cluster of IND.PRS.3SG (Out)
// and of SBJV.PRS.3SG (In).
struct ConsonantPair {
  IpaString out_cluster;
  IpaString in_cluster;

  std::string label() const;  // "[s]-[sk]", "[ ]-[jɡ]" for an empty cluster
  friend auto operator<=>(const ConsonantPair&, const ConsonantPair&) = default;
};

ConsonantPair consonant_pair(const InflectionTable& table,
                             const EndingInventory& inventory = EndingInventory::spanish_present());

// Table TSV: lemma, verb_class, then the 12 forms in cell order. Header row
// names the cells by their UniMorph tags.
void write_tables(std::ostream& out, const std::vector<InflectionTable>& tables);
std::vector<InflectionTable> read_tables(std::istream& in);

// Back to UniMorph TSV, one line per cell.
void write_unimorph(std::ostream& out, const std::vector<InflectionTable>& tables);

}  // namespace morphome
