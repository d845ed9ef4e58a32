#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace rh {

// Non-fatal conditions (clipping, rank reduction, fallbacks) are reported
// through a process-wide sink. The default sink writes to stderr.
using WarningSink = std::function<void(std::string_view)>;

// Returns the previous sink. Passing an empty function restores the default.
WarningSink set_warning_sink(WarningSink sink);

void warn(std::string_view message);

// Captures warnings for the lifetime of the object, then restores the
// previous sink. Used by tests and by the CLI's --quiet mode.
class ScopedWarningCapture {
public:
    ScopedWarningCapture();
    ~ScopedWarningCapture();
    ScopedWarningCapture(const ScopedWarningCapture&) = delete;
    ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }
    bool contains(std::string_view fragment) const;

private:
    std::vector<std::string> messages_;
    WarningSink previous_;
};

} // namespace rh
