#pragma once

#include <nlohmann/json.hpp>

namespace scr {

// Insertion-ordered JSON: field order in every record is part of the
// canonical form.
using Json = nlohmann::ordered_json;

}  // namespace scr
