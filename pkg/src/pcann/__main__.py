from pcann.cli import main

main()
