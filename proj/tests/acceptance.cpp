#include "cycledistill/distill.hpp"
#include "cycledistill/config.hpp"
#include "cycledistill/manifest.hpp"
int main() { return 0; }
