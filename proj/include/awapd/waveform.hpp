#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "awapd/error.hpp"
#include "awapd/pd_class.hpp"

namespace awapd {

// A time-stamped voltage record. Timestamps are seconds and strictly
// increasing; sampling need not be uniform. Immutable once constructed.
class Waveform {
 public:
  Waveform(std::vector<double> times, std::vector<double> values,
           std::optional<PdClass> label = std::nullopt, std::string source_id = {})
      : times_(std::move(times)),
        values_(std::move(values)),
        label_(label),
        source_id_(std::move(source_id)) {
    if (times_.size() != values_.size()) {
      throw MalformedInput("waveform: times and values differ in length");
    }
    if (times_.size() < 2) throw MalformedInput("waveform: fewer than 2 samples");
    for (std::size_t i = 0; i < times_.size(); ++i) {
      if (!std::isfinite(times_[i]) || !std::isfinite(values_[i])) {
        throw MalformedInput("waveform: non-finite sample at row " + std::to_string(i));
      }
      if (i > 0 && !(times_[i] > times_[i - 1])) {
        throw MalformedInput("waveform: time not strictly increasing at row " + std::to_string(i));
      }
    }
  }

  std::span<const double> times() const { return times_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return times_.size(); }
  const std::optional<PdClass>& label() const { return label_; }
  const std::string& source_id() const { return source_id_; }

  bool operator==(const Waveform&) const = default;

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  std::optional<PdClass> label_;
  std::string source_id_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Full-field parse; a leading '+' is accepted, trailing garbage is not.
inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

// Shortest decimal text that parses back to the identical binary value.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace detail

// Parses two-column (time, amplitude) CSV text. A single non-numeric first
// row is treated as a header; extra columns are ignored; blank lines skipped.
inline Waveform parse_waveform_csv(std::string_view text, std::string source_id = {}) {
  std::vector<double> times, values;
  std::size_t line_no = 0;
  bool first_content = true;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;
    if (first_content && line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto fields = detail::split_fields(line);
    std::optional<double> t, v;
    if (fields.size() >= 2) {
      t = detail::parse_double(fields[0]);
      v = detail::parse_double(fields[1]);
    }
    if (first_content) {
      first_content = false;
      if (!t || !v) continue;  // header row
    }
    if (fields.size() < 2) {
      throw MalformedInput("line " + std::to_string(line_no) + ": expected at least 2 columns");
    }
    if (!t || !v) throw MalformedInput("line " + std::to_string(line_no) + ": non-numeric field");
    if (!std::isfinite(*t) || !std::isfinite(*v)) {
      throw MalformedInput("line " + std::to_string(line_no) + ": non-finite value");
    }
    if (!times.empty() && !(*t > times.back())) {
      throw MalformedInput("line " + std::to_string(line_no) + ": time not strictly increasing");
    }
    times.push_back(*t);
    values.push_back(*v);
  }
  if (times.size() < 2) throw MalformedInput("waveform CSV has fewer than 2 data rows");
  return Waveform(std::move(times), std::move(values), std::nullopt, std::move(source_id));
}

inline Waveform read_waveform_csv(const std::filesystem::path& path) {
  return parse_waveform_csv(detail::read_file(path), path.stem().string());
}

inline std::string format_waveform_csv(const Waveform& w) {
  std::string out = "time_s,amplitude_v\n";
  out.reserve(out.size() + w.size() * 40);
  auto t = w.times();
  auto v = w.values();
  for (std::size_t i = 0; i < w.size(); ++i) {
    out += detail::format_double(t[i]);
    out += ',';
    out += detail::format_double(v[i]);
    out += '\n';
  }
  return out;
}

inline void write_waveform_csv(const Waveform& w, const std::filesystem::path& path) {
  detail::write_file(path, format_waveform_csv(w));
}

}  // namespace awapd
