#include "docval/prompt.hpp"

#include <sstream>
#include <stdexcept>

namespace docval {

const std::vector<std::string>& default_guidelines() {
  static const std::vector<std::string> kGuidelines = {
      "Extract only the elements that are present verbatim in the document text. Do NOT infer any information.",
      "Extract each element EXACTLY as it appears in the document.",
      "Each value in the OCR can only be used AT MOST once. If a value can correspond to multiple fields, pick the "
      "best one.",
      "For each object, output all the keys from the schema even if the value is null. Empty lists should be "
      "outputted as lists with no elements.",
      "If no indication of tax is given, assume the amounts to be gross amounts.",
  };
  return kGuidelines;
}

std::string PromptSpec::render() const {
  std::ostringstream os;
  os << "Your task is to extract the information for the fields provided below. Extract the information in JSON "
        "format according to the following JSON schema:\n";
  os << output_schema.dump(2) << "\n";
  if (!guidelines.empty()) {
    os << "\nAdditional guidelines:\n";
    for (const auto& g : guidelines) os << "- " << g << "\n";
  }
  os << "<ocr>\n" << ocr_text << "\n</ocr>\n";
  os << "Please read the text carefully and follow the instructions.";
  if (include_image) os << "\nAn image of the document is provided below.";
  return os.str();
}

PromptSpec build_prompt(const SchemaDef& schema, std::string ocr_text, const PromptOptions& options) {
  if (ocr_text.empty()) throw std::invalid_argument("build_prompt: OCR text is empty");
  PromptSpec spec;
  spec.output_schema = to_output_schema(schema);
  spec.guidelines = options.guidelines ? *options.guidelines : default_guidelines();
  spec.ocr_text = std::move(ocr_text);
  spec.image_path = options.image_path;
  spec.include_image = options.include_image;
  return spec;
}

}  // namespace docval
