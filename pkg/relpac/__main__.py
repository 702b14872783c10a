from relpac.cli import main

main()
