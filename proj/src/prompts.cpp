#include "rounds/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "rounds/error.hpp"
#include "rounds/text.hpp"

namespace rounds {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Length of the slot starting at tmpl[i] == '{', or 0 when it is not a slot.
std::size_t slot_length(std::string_view tmpl, std::size_t i) {
  if (i >= tmpl.size() || tmpl[i] != '{') return 0;
  std::size_t j = i + 1;
  if (j >= tmpl.size() || !ident_start(tmpl[j])) return 0;
  while (j < tmpl.size() && ident_char(tmpl[j])) ++j;
  if (j >= tmpl.size() || tmpl[j] != '}') return 0;
  return j - i + 1;
}

}  // namespace

std::string render_template(std::string_view tmpl, const PromptVars& vars) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size();) {
    if (std::size_t len = slot_length(tmpl, i); len > 0) {
      std::string_view name = tmpl.substr(i + 1, len - 2);
      auto it = vars.find(name);
      if (it == vars.end()) throw ConfigError("prompt slot {" + std::string(name) + "} has no value");
      out += it->second;
      i += len;
    } else {
      out.push_back(tmpl[i++]);
    }
  }
  return out;
}

std::vector<std::string> template_slots(std::string_view tmpl) {
  std::vector<std::string> slots;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (std::size_t len = slot_length(tmpl, i); len > 0) {
      std::string name(tmpl.substr(i + 1, len - 2));
      if (std::find(slots.begin(), slots.end(), name) == slots.end()) slots.push_back(name);
      i += len - 1;
    }
  }
  return slots;
}

const PromptLibrary& PromptLibrary::builtin() {
  static const PromptLibrary lib = [] {
    PromptLibrary l;
    for (const auto& [name, body] : detail::embedded_prompts()) l.templates_.emplace(name, body);
    return l;
  }();
  return lib;
}

PromptLibrary PromptLibrary::with_overrides(const std::filesystem::path& dir) {
  PromptLibrary lib = builtin();
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    lib.templates_[entry.path().stem().string()] = ss.str();
  }
  if (ec) throw ConfigError("cannot read prompt directory " + dir.string() + ": " + ec.message());
  return lib;
}

const std::string& PromptLibrary::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw ConfigError("unknown prompt template: " + std::string(name));
  return it->second;
}

std::string PromptLibrary::render(std::string_view name, const PromptVars& vars) const {
  return render_template(get(name), vars);
}

std::vector<std::string> PromptLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : templates_) out.push_back(k);
  return out;
}

std::vector<std::string> opening_utterances(const PromptLibrary& lib) {
  std::vector<std::string> out;
  for (const auto& line : text::split_lines(lib.get(prompt::kOpenings))) {
    std::string t = text::trim(line);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace rounds
