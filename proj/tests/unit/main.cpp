#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "nulog/log.hpp"

int main(int argc, char** argv) {
    nulog::log::set_min_level(nulog::log::Level::warn);
    nulog::log::set_sink([](nulog::log::Level, const std::string&) {});
    doctest::Context context(argc, argv);
    return context.run();
}
