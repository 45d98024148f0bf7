#include <algorithm>
#include <cstdio>
#include <sstream>

#include "ubrs/sdp.hpp"

namespace ubrs {

namespace {
std::string fmt17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

std::vector<SdpEntry> sorted_entries(std::vector<SdpEntry> es) {
  std::sort(es.begin(), es.end(), [](const SdpEntry& a, const SdpEntry& b) {
    if (a.block != b.block) return a.block < b.block;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  // Coalesce duplicates so export is canonical.
  std::vector<SdpEntry> out;
  for (const SdpEntry& e : es) {
    if (!out.empty() && out.back().block == e.block && out.back().row == e.row &&
        out.back().col == e.col) {
      out.back().value += e.value;
    } else {
      out.push_back(e);
    }
  }
  std::erase_if(out, [](const SdpEntry& e) { return e.value == 0.0; });
  return out;
}
}  // namespace

std::string export_sdpa(const SdpStandardForm& sf) {
  sf.validate();
  if (sf.b.empty()) throw SolverError("export_sdpa: problem has no constraints");
  std::ostringstream os;
  os << sf.m() << "\n";
  os << sf.blocks.size() << "\n";
  for (size_t i = 0; i < sf.blocks.size(); ++i) {
    if (i) os << " ";
    os << (sf.blocks[i].diagonal ? -sf.blocks[i].size : sf.blocks[i].size);
  }
  os << "\n";
  for (size_t i = 0; i < sf.b.size(); ++i) {
    if (i) os << " ";
    os << fmt17(sf.b[i]);
  }
  os << "\n";
  auto emit = [&](int matno, const std::vector<SdpEntry>& entries) {
    for (const SdpEntry& e : sorted_entries(entries)) {
      os << matno << " " << e.block + 1 << " " << e.row + 1 << " " << e.col + 1 << " "
         << fmt17(e.value) << "\n";
    }
  };
  emit(0, sf.c_entries);
  for (int i = 0; i < sf.m(); ++i) emit(i + 1, sf.constraints[i]);
  return os.str();
}

namespace {
struct LineReader {
  std::istringstream in;
  int line_no = 0;
  explicit LineReader(const std::string& text) : in(text) {}

  // Next significant line with separators normalized to spaces.
  bool next(std::string& out) {
    std::string raw;
    while (std::getline(in, raw)) {
      ++line_no;
      if (!raw.empty() && (raw[0] == '"' || raw[0] == '*')) continue;  // comment
      for (char& c : raw) {
        if (c == ',' || c == '{' || c == '}' || c == '(' || c == ')' || c == '\t' || c == '\r') {
          c = ' ';
        }
      }
      bool blank = true;
      for (char c : raw) {
        if (c != ' ') {
          blank = false;
          break;
        }
      }
      if (blank) continue;
      out = raw;
      return true;
    }
    return false;
  }
};

std::vector<double> parse_numbers(const std::string& line, int line_no) {
  std::istringstream is(line);
  std::vector<double> out;
  double v;
  while (is >> v) out.push_back(v);
  if (!is.eof()) {
    throw IoError("sdpa import: malformed number on line " + std::to_string(line_no));
  }
  return out;
}
}  // namespace

SdpStandardForm import_sdpa(const std::string& text) {
  LineReader lr(text);
  std::string line;
  auto need = [&](const char* what) {
    if (!lr.next(line)) throw IoError(std::string("sdpa import: unexpected end of input, expected ") + what);
  };

  need("constraint count");
  std::vector<double> nums = parse_numbers(line, lr.line_no);
  if (nums.size() != 1 || nums[0] < 0) throw IoError("sdpa import: bad constraint count on line " + std::to_string(lr.line_no));
  const int m = static_cast<int>(nums[0]);

  need("block count");
  nums = parse_numbers(line, lr.line_no);
  if (nums.size() != 1 || nums[0] < 1) throw IoError("sdpa import: bad block count on line " + std::to_string(lr.line_no));
  const int nblocks = static_cast<int>(nums[0]);

  need("block sizes");
  nums = parse_numbers(line, lr.line_no);
  if (static_cast<int>(nums.size()) != nblocks) {
    throw IoError("sdpa import: expected " + std::to_string(nblocks) + " block sizes on line " +
                  std::to_string(lr.line_no));
  }
  SdpStandardForm sf;
  for (double v : nums) {
    int s = static_cast<int>(v);
    if (s == 0) throw IoError("sdpa import: zero block size on line " + std::to_string(lr.line_no));
    sf.blocks.push_back(SdpBlockDesc{std::abs(s), s < 0});
  }

  // The b vector may wrap across lines in external files.
  while (static_cast<int>(sf.b.size()) < m) {
    need("b vector");
    for (double v : parse_numbers(line, lr.line_no)) sf.b.push_back(v);
  }
  if (static_cast<int>(sf.b.size()) != m) {
    throw IoError("sdpa import: b vector has wrong length near line " + std::to_string(lr.line_no));
  }
  sf.constraints.resize(m);

  while (lr.next(line)) {
    nums = parse_numbers(line, lr.line_no);
    if (nums.size() != 5) {
      throw IoError("sdpa import: malformed entry line " + std::to_string(lr.line_no) +
                    " (expected 'matno block i j value')");
    }
    int matno = static_cast<int>(nums[0]);
    int block = static_cast<int>(nums[1]);
    int i = static_cast<int>(nums[2]);
    int j = static_cast<int>(nums[3]);
    double value = nums[4];
    if (matno < 0 || matno > m) {
      throw IoError("sdpa import: matrix number out of range on line " + std::to_string(lr.line_no));
    }
    if (block < 1 || block > nblocks) {
      throw IoError("sdpa import: block number out of range on line " + std::to_string(lr.line_no));
    }
    const SdpBlockDesc& blk = sf.blocks[block - 1];
    if (i < 1 || j < 1 || i > blk.size || j > blk.size) {
      throw IoError("sdpa import: index out of block range on line " + std::to_string(lr.line_no));
    }
    if (i > j) std::swap(i, j);
    if (blk.diagonal && i != j) {
      throw IoError("sdpa import: off-diagonal entry in diagonal block on line " +
                    std::to_string(lr.line_no));
    }
    SdpEntry e{block - 1, i - 1, j - 1, value};
    if (matno == 0) {
      sf.c_entries.push_back(e);
    } else {
      sf.constraints[matno - 1].push_back(e);
    }
  }
  sf.validate();
  return sf;
}

}  // namespace ubrs
