// homogenize-rve: command-line front end over the C API.
#include <cstdio>
#include <cstring>

#include "hrve/hrve.h"

int main(int argc, char** argv) {
  if (argc < 2 || !std::strcmp(argv[1], "--help") || !std::strcmp(argv[1], "-h") ||
      !std::strcmp(argv[1], "help")) {
    std::fputs(hrve_usage(), argc < 2 ? stderr : stdout);
    return argc < 2 ? 1 : 0;
  }
  if (!std::strcmp(argv[1], "--version")) {
    std::printf("homogenize-rve %s\n", hrve_version());
    return 0;
  }
  hrve_config* cfg = nullptr;
  if (hrve_config_parse(argc - 1, argv + 1, &cfg) != HRVE_OK) {
    std::fprintf(stderr, "homogenize-rve: usage error: %s\n", hrve_last_error());
    std::fputs("run 'homogenize-rve --help' for the list of keys\n", stderr);
    return 1;
  }
  const int status = hrve_run(cfg);
  hrve_config_free(cfg);
  return status;
}
