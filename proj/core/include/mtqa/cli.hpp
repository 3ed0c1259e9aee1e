#pragma once

#include <string>
#include <vector>

namespace mtqa {

struct EvalReport;

/// Renders a report as an aligned table or a structured JSON document.
std::string emit_report(const EvalReport& report, const std::string& format);

namespace cli {

/// Runs one CLI command. Returns 0 on success, 1 on validation or gating
/// failure, 2 on usage errors.
int dispatch(const std::vector<std::string>& args);

}  // namespace cli
}  // namespace mtqa
