#pragma once

// Maps JSON pointers to line numbers in the source text of an already
// validated document, for line-anchored schema diagnostics.

#include <cctype>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>

namespace cfgspace::tools {

class JsonLocator {
 public:
  explicit JsonLocator(std::string_view text) : text_(text) {
    skip_ws();
    if (pos_ < text_.size()) value("");
  }

  /// 1-based line of the deepest recorded node on the pointer's path.
  std::size_t line_of(std::string pointer) const {
    while (true) {
      const auto it = offsets_.find(pointer);
      if (it != offsets_.end()) return line_at(it->second);
      if (pointer.empty()) return 1;
      pointer.erase(pointer.rfind('/'));
    }
  }

  std::size_t line_at(std::size_t offset) const {
    std::size_t line = 1;
    for (std::size_t i = 0; i < offset && i < text_.size(); ++i)
      if (text_[i] == '\n') ++line;
    return line;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string string_token() {
    std::string s;
    ++pos_;  // opening quote
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\') ++pos_;
      if (pos_ < text_.size()) s += text_[pos_++];
    }
    ++pos_;
    return s;
  }

  static std::string escape(const std::string& key) {
    std::string out;
    for (char ch : key) {
      if (ch == '~') out += "~0";
      else if (ch == '/') out += "~1";
      else out += ch;
    }
    return out;
  }

  void value(const std::string& ptr) {
    skip_ws();
    if (pos_ >= text_.size()) return;
    offsets_[ptr] = pos_;
    const char ch = text_[pos_];
    if (ch == '{') {
      ++pos_;
      skip_ws();
      while (pos_ < text_.size() && text_[pos_] != '}') {
        const std::size_t key_at = pos_;
        const std::string key = string_token();
        const std::string child = ptr + "/" + escape(key);
        skip_ws();
        ++pos_;  // colon
        value(child);
        offsets_[child] = key_at;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
        skip_ws();
      }
      ++pos_;
    } else if (ch == '[') {
      ++pos_;
      skip_ws();
      std::size_t i = 0;
      while (pos_ < text_.size() && text_[pos_] != ']') {
        value(ptr + "/" + std::to_string(i++));
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
        skip_ws();
      }
      ++pos_;
    } else if (ch == '"') {
      string_token();
    } else {
      while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '}' && text_[pos_] != ']' &&
             !std::isspace(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::map<std::string, std::size_t> offsets_;
};

}  // namespace cfgspace::tools
