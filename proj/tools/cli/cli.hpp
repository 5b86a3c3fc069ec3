#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace CLI {
class App;
}

namespace emojivoice::cli {

enum ExitCode { kOk = 0, kValidation = 1, kRuntime = 2 };

// Parses argv and runs the selected command. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// The full command tree without actions attached; used by the docs test.
std::unique_ptr<CLI::App> describe();

}  // namespace emojivoice::cli
