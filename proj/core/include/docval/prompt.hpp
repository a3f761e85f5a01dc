#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "docval/schema.hpp"

namespace docval {

/// Extraction guidelines shipped with every prompt unless overridden.
const std::vector<std::string>& default_guidelines();

struct PromptOptions {
  std::optional<std::vector<std::string>> guidelines;  // nullopt: defaults; empty: none
  std::optional<std::string> image_path;
  bool include_image = false;
};

/// Schema, instructions and document, plus an optional image reference that
/// backends attach out of band.
struct PromptSpec {
  nlohmann::json output_schema;
  std::vector<std::string> guidelines;
  std::string ocr_text;
  std::optional<std::string> image_path;
  bool include_image = false;

  std::string render() const;
};

/// Throws std::invalid_argument when ocr_text is empty.
PromptSpec build_prompt(const SchemaDef& schema, std::string ocr_text, const PromptOptions& options = {});

}  // namespace docval
