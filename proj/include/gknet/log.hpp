#pragma once

#include <functional>
#include <string>

namespace gknet {

using WarningSink = std::function<void(const std::string&)>;

/// Routes a warning to the installed sink (standard error by default).
void warn(const std::string& message);

/// Replaces the warning sink and returns the previous one. Passing an empty
/// function restores the default.
WarningSink set_warning_sink(WarningSink sink);

}  // namespace gknet
