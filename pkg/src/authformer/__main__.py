from authformer import main

main()
