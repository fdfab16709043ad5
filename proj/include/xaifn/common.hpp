#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace xaifn {

using json = nlohmann::json;

/// Error carrying a machine-readable reason code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

enum class Label : std::uint8_t { True = 0, Fake = 1 };

inline std::string_view to_string(Label label) {
  return label == Label::Fake ? "fake" : "true";
}

Label parse_label(std::string_view text);

inline Label flip(Label label) {
  return label == Label::Fake ? Label::True : Label::Fake;
}

/// Probability of FAKE mapped to a label; ties go to FAKE.
inline Label label_from_score(double score) {
  return score >= 0.5 ? Label::Fake : Label::True;
}

inline double confidence_from_score(double score) {
  return score >= 0.5 ? score : 1.0 - score;
}

/// A value whose denominator may be zero. `value` is empty when undefined.
struct Rate {
  std::optional<double> value;
  std::int64_t numerator = 0;
  std::int64_t denominator = 0;

  static Rate of(std::int64_t num, std::int64_t den) {
    Rate r;
    r.numerator = num;
    r.denominator = den;
    if (den > 0) r.value = static_cast<double>(num) / static_cast<double>(den);
    return r;
  }
  bool defined() const { return value.has_value(); }
};

// Line-delimited record files.
std::vector<json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);
json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& value);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

/// FNV-1a over bytes, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace xaifn
