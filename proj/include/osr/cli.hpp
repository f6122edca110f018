#pragma once

namespace osr {

// Entry point shared by the installed binary and the test harness.
int cli_main(int argc, const char** argv);

} // namespace osr
