# radonshell project
