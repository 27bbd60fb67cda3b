#pragma once

#include <string_view>
#include <vector>

namespace sizer::detail {

std::string_view embedded_templates();

struct EmbeddedModel {
  std::string_view name;
  std::string_view text;
};
const std::vector<EmbeddedModel>& embedded_models();

}  // namespace sizer::detail
