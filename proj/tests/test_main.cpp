#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"
#include "qfs/log.hpp"

int main(int argc, char** argv)
{
    qfs::init_logging();
    return doctest::Context(argc, argv).run();
}
