// Copyright 2026 The mfacm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// On-disk formats. All binary fields are little-endian.
//
//   LEB (layered embeddings), 21-byte header then payload:
//     "LEB1" | u32 version=1 | u32 L | u32 T | u32 D | u8 dtype=0 | f32[L*T*D]
//
//   Checkpoint container:
//     "MFAC" | u32 version=1 | u32 count |
//       count x ( u16 name_len | name | u8 rank | u32 dims[rank] | f32[prod] )
//
//   Manifest: TSV lines "utt_id<TAB>path<TAB>{bonafide|spoof}".
//   Scores:   lines "utt_id<SPACE>score", score printed as %#.6g.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mfacm/embeddings.hpp"
#include "mfacm/tensor.hpp"

namespace mfacm {

class IoError : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind {
  kBadMagic,
  kBadVersion,
  kBadDtype,
  kBadExtent,
  kTruncated,
  kTrailingBytes,
  kFieldCount,
  kUnknownLabel,
  kDuplicateId,
  kDuplicateName,
  kMalformedRecord,
};

inline const char* parse_error_kind_name(ParseErrorKind k) {
  switch (k) {
    case ParseErrorKind::kBadMagic: return "bad magic";
    case ParseErrorKind::kBadVersion: return "unsupported version";
    case ParseErrorKind::kBadDtype: return "unsupported dtype";
    case ParseErrorKind::kBadExtent: return "invalid extent";
    case ParseErrorKind::kTruncated: return "truncated";
    case ParseErrorKind::kTrailingBytes: return "trailing bytes";
    case ParseErrorKind::kFieldCount: return "wrong field count";
    case ParseErrorKind::kUnknownLabel: return "unknown label";
    case ParseErrorKind::kDuplicateId: return "duplicate utterance id";
    case ParseErrorKind::kDuplicateName: return "duplicate tensor name";
    case ParseErrorKind::kMalformedRecord: return "malformed record";
  }
  return "parse error";
}

/// A rejected input. `position` is a byte offset for binary formats and a
/// 1-based line number for text formats.
class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, std::size_t position, const std::string& detail)
      : Error(std::string(parse_error_kind_name(kind)) + " at " + std::to_string(position) +
              ": " + detail),
        kind_(kind),
        position_(position) {}

  ParseErrorKind kind() const { return kind_; }
  std::size_t position() const { return position_; }

 private:
  ParseErrorKind kind_;
  std::size_t position_;
};

namespace io {

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { le(v); }
  void u32(std::uint32_t v) { le(v); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::string_view s) { bytes_.append(s); }
  const std::string& bytes() const { return bytes_; }

 private:
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i)
      bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(le<std::uint8_t>(what)); }
  std::uint16_t u16(const char* what) { return le<std::uint16_t>(what); }
  std::uint32_t u32(const char* what) { return le<std::uint32_t>(what); }
  float f32(const char* what) { return std::bit_cast<float>(le<std::uint32_t>(what)); }

  std::string_view raw(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n)
      throw ParseError(ParseErrorKind::kTruncated, pos_,
                       std::string("need ") + std::to_string(n) + " bytes for " + what +
                           ", have " + std::to_string(remaining()));
  }

 private:
  template <typename U>
  U le(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return data;
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// LEB

inline constexpr std::size_t kLebHeaderBytes = 21;

inline std::string encode_leb(const LayeredEmbeddings<float>& emb) {
  detail::ByteWriter w;
  w.raw("LEB1");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(emb.layers()));
  w.u32(static_cast<std::uint32_t>(emb.frames()));
  w.u32(static_cast<std::uint32_t>(emb.dim()));
  w.u8(0);
  for (float v : emb.tensor().values()) w.f32(v);
  return w.bytes();
}

inline LayeredEmbeddings<float> decode_leb(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.remaining() < 4 || bytes.substr(0, 4) != "LEB1")
    throw ParseError(ParseErrorKind::kBadMagic, 0, "expected \"LEB1\"");
  r.raw(4, "magic");
  const auto version = r.u32("version");
  if (version != 1)
    throw ParseError(ParseErrorKind::kBadVersion, 4, "version " + std::to_string(version));
  const std::size_t L = r.u32("L"), T = r.u32("T"), D = r.u32("D");
  if (L == 0 || T == 0 || D == 0)
    throw ParseError(ParseErrorKind::kBadExtent, 8,
                     "extents " + std::to_string(L) + "x" + std::to_string(T) + "x" +
                         std::to_string(D));
  const auto dtype = r.u8("dtype");
  if (dtype != 0)
    throw ParseError(ParseErrorKind::kBadDtype, 20, "dtype " + std::to_string(dtype));
  const std::size_t n = L * T * D;
  r.need(4 * n, "payload");
  LayeredEmbeddings<float> emb(L, T, D);
  for (auto& v : emb.tensor().values()) v = r.f32("payload");
  if (r.remaining() != 0)
    throw ParseError(ParseErrorKind::kTrailingBytes, r.position(),
                     std::to_string(r.remaining()) + " bytes after payload");
  return emb;
}

/// Returns the number of bytes written.
inline std::size_t write_leb(const LayeredEmbeddings<float>& emb, const std::filesystem::path& path) {
  const auto bytes = encode_leb(emb);
  write_file(path, bytes);
  return bytes.size();
}

inline LayeredEmbeddings<float> read_leb(const std::filesystem::path& path) {
  return decode_leb(read_file(path));
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestEntry {
  std::string utt_id;
  std::string path;
  Label label;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline bool has_space(std::string_view s) {
  return s.find_first_of(" \t\r\n\v\f") != std::string_view::npos;
}

/// Calls fn(line_number, line) for each non-empty line; strips a trailing CR.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (!line.empty()) fn(line_no, line);
    start = end + 1;
  }
}

}  // namespace detail

inline Label parse_label(std::string_view s, std::size_t line) {
  if (s == "bonafide") return Label::kBonafide;
  if (s == "spoof") return Label::kSpoof;
  throw ParseError(ParseErrorKind::kUnknownLabel, line, "\"" + std::string(s) + "\"");
}

inline std::vector<ManifestEntry> parse_manifest(std::string_view text) {
  std::vector<ManifestEntry> entries;
  std::set<std::string, std::less<>> seen;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 3)
      throw ParseError(ParseErrorKind::kFieldCount, line_no,
                       "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
    if (fields[0].empty() || detail::has_space(fields[0]))
      throw ParseError(ParseErrorKind::kMalformedRecord, line_no, "invalid utterance id");
    if (fields[1].empty())
      throw ParseError(ParseErrorKind::kMalformedRecord, line_no, "empty path");
    const Label label = parse_label(fields[2], line_no);
    if (!seen.emplace(fields[0]).second)
      throw ParseError(ParseErrorKind::kDuplicateId, line_no, std::string(fields[0]));
    entries.push_back({std::string(fields[0]), std::string(fields[1]), label});
  });
  return entries;
}

inline std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    out += e.utt_id;
    out += '\t';
    out += e.path;
    out += '\t';
    out += label_name(e.label);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Score files

struct ScoreRecord {
  std::string utt_id;
  double score;
};

inline std::string format_score(double score) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%#.6g", score);
  return buf;
}

inline std::string write_scores(const std::vector<ScoreRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    if (!std::isfinite(r.score))
      throw DomainError("non-finite score for utterance " + r.utt_id);
    if (r.utt_id.empty() || detail::has_space(r.utt_id))
      throw DomainError("invalid utterance id \"" + r.utt_id + "\"");
    out += r.utt_id;
    out += ' ';
    out += format_score(r.score);
    out += '\n';
  }
  return out;
}

inline std::vector<ScoreRecord> read_scores(std::string_view text) {
  std::vector<ScoreRecord> records;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto fields = detail::split(line, ' ');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
      throw ParseError(ParseErrorKind::kMalformedRecord, line_no,
                       "expected \"utt_id score\", got \"" + std::string(line) + "\"");
    const std::string num(fields[1]);
    char* end = nullptr;
    const double v = std::strtod(num.c_str(), &end);
    if (end != num.c_str() + num.size() || !std::isfinite(v))
      throw ParseError(ParseErrorKind::kMalformedRecord, line_no,
                       "bad score \"" + num + "\"");
    records.push_back({std::string(fields[0]), v});
  });
  return records;
}

// ---------------------------------------------------------------------------
// Checkpoint container

using NamedTensor = std::pair<std::string, num::Tensor<float>>;
using NamedTensors = std::vector<NamedTensor>;

inline std::string encode_checkpoint(const NamedTensors& tensors) {
  detail::ByteWriter w;
  w.raw("MFAC");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  std::set<std::string> names;
  for (const auto& [name, t] : tensors) {
    if (!names.insert(name).second) throw DomainError("duplicate tensor name \"" + name + "\"");
    if (name.size() > 0xffff) throw DomainError("tensor name too long");
    if (t.rank() == 0 || t.rank() > 255) throw ShapeError("unsupported tensor rank for " + name);
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.dims()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.values()) w.f32(v);
  }
  return w.bytes();
}

inline NamedTensors decode_checkpoint(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.remaining() < 4 || bytes.substr(0, 4) != "MFAC")
    throw ParseError(ParseErrorKind::kBadMagic, 0, "expected \"MFAC\"");
  r.raw(4, "magic");
  const auto version = r.u32("version");
  if (version != 1)
    throw ParseError(ParseErrorKind::kBadVersion, 4, "version " + std::to_string(version));
  const auto count = r.u32("tensor count");
  NamedTensors out;
  std::set<std::string, std::less<>> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.position();
    const auto len = r.u16("name length");
    std::string name(r.raw(len, "name"));
    if (!names.insert(name).second)
      throw ParseError(ParseErrorKind::kDuplicateName, at, name);
    const auto rank = r.u8("rank");
    if (rank == 0) throw ParseError(ParseErrorKind::kBadExtent, at, name + " has rank 0");
    num::Dims dims(rank);
    std::size_t n = 1;
    for (auto& d : dims) {
      d = r.u32("dim");
      if (d == 0) throw ParseError(ParseErrorKind::kBadExtent, at, name + " has a zero extent");
      n *= d;
    }
    r.need(4 * n, "tensor data");
    std::vector<float> data(n);
    for (auto& v : data) v = r.f32("tensor data");
    out.emplace_back(std::move(name), num::Tensor<float>(std::move(dims), std::move(data)));
  }
  if (r.remaining() != 0)
    throw ParseError(ParseErrorKind::kTrailingBytes, r.position(),
                     std::to_string(r.remaining()) + " bytes after last tensor");
  return out;
}

inline void save_checkpoint(const NamedTensors& tensors, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(tensors));
}

inline NamedTensors load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace io
}  // namespace mfacm
